#include "utvi/datagen.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "utvi/fmtio.hpp"
#include "utvi/kernels.hpp"
#include "utvi/normal.hpp"

namespace utvi {

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArtifactError("cannot open for writing: " + path);
    out << content;
    if (!out) throw ArtifactError("write failed: " + path);
}

void SimParams::validate() const {
    if (!(n_photons > 0.0) || side == 0 || !(sigma_b > 0.0) || !(sigma_r > 0.0) ||
        !(wavelength_px > 0.0) || !(na > 0.0)) {
        throw ParamError("SimParams: all fields must be positive");
    }
    if (std::fabs(sigma_b - 0.21 * wavelength_px / na) > 1e-12) {
        throw ParamError("SimParams: sigma_b must equal 0.21*wavelength/na");
    }
}

double noise_sigma(double x) {
    const double s = std::sin(2.0 * M_PI * x - 0.5 * M_PI);
    return 0.1 + 0.2 * s * s;
}

RegressionBatch gen_regression_batch(std::size_t n, Rng& rng, double x_low, double x_high) {
    if (n == 0) throw ParamError("gen_regression_batch: n must be positive");
    if (!(x_low < x_high)) throw ParamError("gen_regression_batch: need x_low < x_high");
    RegressionBatch b;
    b.x.resize(n);
    b.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(x_low, x_high);
        b.x[i] = x;
        b.y[i] = x + noise_sigma(x) * rng.normal();
    }
    return b;
}

std::vector<double> expected_image(double x, double y, const SimParams& sim) {
    sim.validate();
    const std::size_t L = sim.side;
    const double h = 0.5 * static_cast<double>(L);
    const double inv = 1.0 / sim.sigma_b;
    std::vector<double> fx(L), fy(L);
    for (std::size_t i = 0; i < L; ++i) {
        const double c = -h + 0.5 + static_cast<double>(i);
        fx[i] = normal_cdf((c + 0.5 - x) * inv) - normal_cdf((c - 0.5 - x) * inv);
        fy[i] = normal_cdf((c + 0.5 - y) * inv) - normal_cdf((c - 0.5 - y) * inv);
    }
    std::vector<double> img(L * L);
    for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < L; ++c) img[r * L + c] = sim.n_photons * fx[c] * fy[r];
    }
    return img;
}

double expected_in_frame_count(double x, double y, const SimParams& sim) {
    sim.validate();
    return in_frame_count(x, y, sim.n_photons, static_cast<double>(sim.side), sim.sigma_b);
}

EmitterSample simulate_emitter(Rng& rng, const SimParams& sim) {
    sim.validate();
    EmitterSample s;
    s.x = rng.normal(0.0, sim.sigma_r);
    s.y = rng.normal(0.0, sim.sigma_r);
    const std::vector<double> mean = expected_image(s.x, s.y, sim);
    s.image.resize(mean.size());
    double total = 0.0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        s.image[i] = static_cast<double>(rng.poisson(mean[i]));
        total += mean[i];
    }
    s.n_detected = total;
    return s;
}

Dataset make_regression_dataset(std::size_t n, Rng& rng, double x_low, double x_high) {
    RegressionBatch b = gen_regression_batch(n, rng, x_low, x_high);
    Dataset d;
    d.n = n;
    d.input_dim = 1;
    d.target_dim = 1;
    d.inputs = std::move(b.x);
    d.targets = std::move(b.y);
    return d;
}

Dataset make_localization_dataset(std::size_t n, Rng& rng, const SimParams& sim) {
    if (n == 0) throw ParamError("make_localization_dataset: n must be positive");
    Dataset d;
    d.n = n;
    d.input_dim = sim.side * sim.side;
    d.target_dim = 3;
    d.inputs.reserve(n * d.input_dim);
    d.targets.reserve(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        EmitterSample s = simulate_emitter(rng, sim);
        d.inputs.insert(d.inputs.end(), s.image.begin(), s.image.end());
        d.targets.push_back(s.x);
        d.targets.push_back(s.y);
        d.targets.push_back(s.n_detected);
    }
    return d;
}

namespace {

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t pos = text.find('\n', start);
        if (pos == std::string_view::npos) pos = text.size();
        std::string_view line = text.substr(start, pos - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.push_back(line);
        start = pos + 1;
    }
    return out;
}

std::string localization_header(std::size_t pixels) {
    std::string h;
    for (std::size_t i = 0; i < pixels; ++i) {
        h += "px_";
        h += std::to_string(i);
        h += ',';
    }
    h += "x,y,n_detected";
    return h;
}

Dataset read_csv(const std::string& path, const std::string& expect_header,
                 std::size_t input_dim, std::size_t target_dim) {
    const std::string text = read_text_file(path);
    const std::vector<std::string_view> lines = split_lines(text);
    if (lines.empty() || lines[0] != expect_header) {
        throw ArtifactError("dataset header mismatch in " + path);
    }
    Dataset d;
    d.input_dim = input_dim;
    d.target_dim = target_dim;
    d.n = lines.size() - 1;
    d.inputs.reserve(d.n * input_dim);
    d.targets.reserve(d.n * target_dim);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split_csv_line(lines[r]);
        if (cells.size() != input_dim + target_dim) {
            throw ArtifactError("dataset row " + std::to_string(r) + " has wrong column count in " +
                                path);
        }
        for (std::size_t c = 0; c < input_dim; ++c) {
            d.inputs.push_back(parse_double(cells[c], "dataset"));
        }
        for (std::size_t c = 0; c < target_dim; ++c) {
            d.targets.push_back(parse_double(cells[input_dim + c], "dataset"));
        }
    }
    return d;
}

}  // namespace

void write_regression_csv(const std::string& path, const Dataset& d) {
    if (d.input_dim != 1 || d.target_dim != 1) {
        throw ShapeError("write_regression_csv: not a regression dataset");
    }
    std::string out = "x,y\n";
    for (std::size_t i = 0; i < d.n; ++i) {
        out += fmt17(d.inputs[i]);
        out += ',';
        out += fmt17(d.targets[i]);
        out += '\n';
    }
    write_text_file(path, out);
}

void write_localization_csv(const std::string& path, const Dataset& d) {
    if (d.target_dim != 3) throw ShapeError("write_localization_csv: not a localization dataset");
    std::string out = localization_header(d.input_dim);
    out += '\n';
    for (std::size_t i = 0; i < d.n; ++i) {
        for (std::size_t c = 0; c < d.input_dim; ++c) {
            out += fmt17(d.inputs[i * d.input_dim + c]);
            out += ',';
        }
        out += fmt17(d.targets[i * 3]);
        out += ',';
        out += fmt17(d.targets[i * 3 + 1]);
        out += ',';
        out += fmt17(d.targets[i * 3 + 2]);
        out += '\n';
    }
    write_text_file(path, out);
}

Dataset read_regression_csv(const std::string& path) { return read_csv(path, "x,y", 1, 1); }

Dataset read_localization_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    const std::size_t nl = text.find('\n');
    std::string header = text.substr(0, nl == std::string::npos ? text.size() : nl);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    const auto cells = split_csv_line(header);
    if (cells.size() < 4) throw ArtifactError("localization header too short in " + path);
    const std::size_t input_dim = cells.size() - 3;
    if (header != localization_header(input_dim)) {
        throw ArtifactError("dataset header mismatch in " + path);
    }
    return read_csv(path, header, input_dim, 3);
}

}  // namespace utvi
