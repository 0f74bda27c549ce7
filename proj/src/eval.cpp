#include "utvi/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "utvi/fmtio.hpp"
#include "utvi/par.hpp"
#include "utvi/rng.hpp"

namespace utvi {

int mode_sample_count(const PropagationMode& mode) {
    switch (mode.kind) {
        case PropagationMode::Kind::SMP: return 0;
        case PropagationMode::Kind::UTVI: return 3;
        case PropagationMode::Kind::MCVI: return mode.n_samples;
    }
    return 0;
}

EvalReport evaluate_nll(const std::vector<Model>& ensemble, const Dataset& data,
                        const PropagationMode& mode, std::uint64_t eval_seed) {
    if (ensemble.empty()) throw ParamError("evaluate_nll: empty ensemble");
    if (data.n == 0) throw ParamError("evaluate_nll: empty dataset");
    mode.validate();
    const std::size_t k = ensemble.front().spec.output_count();
    if (data.target_dim != k) throw ShapeError("evaluate_nll: target width does not match model");
    for (const Model& m : ensemble) {
        if (m.spec.output_count() != k || m.spec.input_count() != data.input_dim) {
            throw ShapeError("evaluate_nll: ensemble members disagree with the data shape");
        }
    }

    EvalReport rep;
    rep.mode = mode.name();
    rep.samples = mode_sample_count(mode);
    rep.pred_mean.assign(data.n * k, 0.0);
    rep.pred_var.assign(data.n * k, 0.0);
    std::vector<double> nll_pd(data.n, 0.0);

    const bool mc = mode.kind == PropagationMode::Kind::MCVI;
    const double wm = 1.0 / static_cast<double>(ensemble.size());
    for (std::size_t em = 0; em < ensemble.size(); ++em) {
        EvalCache ec;
        ec.build(ensemble[em]);
        const ModelSpec& spec = ensemble[em].spec;
        parallel_for(data.n, [&](std::size_t lo, std::size_t hi) {
            Workspace<double> ws;
            double om[3], ov[3];
            for (std::size_t i = lo; i < hi; ++i) {
                if (mc) {
                    Rng rng(derive_seed(eval_seed, {streams::eval, em, i}));
                    forward_net<double>(spec, ec.pv, data.input_row(i), mode, &rng, ws, om, ov);
                } else {
                    forward_net<double>(spec, ec.pv, data.input_row(i), mode, nullptr, ws, om,
                                        ov);
                }
                nll_pd[i] += datum_nll<double>(om, ov, data.target_row(i), k);
                for (std::size_t j = 0; j < k; ++j) {
                    rep.pred_mean[i * k + j] += wm * om[j];
                    rep.pred_var[i * k + j] += wm * (ov[j] + om[j] * om[j]);
                }
            }
        });
    }
    for (std::size_t s = 0; s < rep.pred_var.size(); ++s) {
        rep.pred_var[s] -= rep.pred_mean[s] * rep.pred_mean[s];
        if (rep.pred_var[s] < 0.0) rep.pred_var[s] = 0.0;
    }
    double acc = 0.0;
    for (double v : nll_pd) acc += v;
    rep.mean_nll = acc * wm / static_cast<double>(data.n);
    if (!std::isfinite(rep.mean_nll)) {
        throw NumericError("evaluate_nll: non-finite mean NLL");
    }
    return rep;
}

std::vector<double> crb_map(const SimParams& sim, std::size_t per_pixel_count) {
    sim.validate();
    if (per_pixel_count < 1) throw ParamError("crb_map: per_pixel_count must be >= 1");
    const std::size_t L = sim.side;
    const double h = static_cast<double>(L) / 2.0;
    const std::size_t m = static_cast<std::size_t>(
        std::ceil(std::sqrt(static_cast<double>(per_pixel_count))));
    const double inv_m = 1.0 / static_cast<double>(m);
    std::vector<double> out(L * L);
    for (std::size_t row = 0; row < L; ++row) {
        for (std::size_t col = 0; col < L; ++col) {
            const double x0 = -h + static_cast<double>(col);
            const double y0 = -h + static_cast<double>(row);
            double acc = 0.0;
            for (std::size_t iy = 0; iy < m; ++iy) {
                for (std::size_t ix = 0; ix < m; ++ix) {
                    const double x = x0 + (static_cast<double>(ix) + 0.5) * inv_m;
                    const double y = y0 + (static_cast<double>(iy) + 0.5) * inv_m;
                    acc += expected_in_frame_count(x, y, sim);
                }
            }
            const double mean_ni = acc / static_cast<double>(m * m);
            out[row * L + col] = sim.sigma_b * sim.sigma_b / mean_ni;
        }
    }
    return out;
}

VarianceMap variance_map(const std::vector<Model>& ensemble, const SimParams& sim,
                         const PropagationMode& mode, std::size_t per_pixel_count,
                         std::uint64_t seed) {
    if (ensemble.empty()) throw ParamError("variance_map: empty ensemble");
    if (per_pixel_count < 1) throw ParamError("variance_map: per_pixel_count must be >= 1");
    sim.validate();
    mode.validate();
    const std::size_t L = sim.side;
    for (const Model& m : ensemble) {
        if (m.spec.task != Task::Localization || m.spec.input_count() != L * L ||
            m.spec.output_count() != 3) {
            throw ShapeError("variance_map: ensemble must be localizers matching sim.side");
        }
    }
    std::vector<EvalCache> ecs(ensemble.size());
    for (std::size_t em = 0; em < ensemble.size(); ++em) ecs[em].build(ensemble[em]);

    VarianceMap vm;
    vm.side = L;
    vm.value.assign(L * L, 0.0);
    vm.count.assign(L * L, static_cast<std::uint32_t>(per_pixel_count));
    const bool mc = mode.kind == PropagationMode::Kind::MCVI;
    const double h = static_cast<double>(L) / 2.0;
    const double norm = 1.0 / static_cast<double>(per_pixel_count * ensemble.size());

    parallel_for(L * L, [&](std::size_t lo, std::size_t hi) {
        Workspace<double> ws;
        std::vector<double> img(L * L);
        double om[3], ov[3];
        for (std::size_t cell = lo; cell < hi; ++cell) {
            const std::size_t row = cell / L, col = cell % L;
            Rng cr(derive_seed(seed, {streams::cell, row, col}));
            double acc = 0.0;
            for (std::size_t e = 0; e < per_pixel_count; ++e) {
                const double x = -h + static_cast<double>(col) + cr.uniform01();
                const double y = -h + static_cast<double>(row) + cr.uniform01();
                const std::vector<double> lam = expected_image(x, y, sim);
                for (std::size_t p = 0; p < img.size(); ++p) {
                    img[p] = static_cast<double>(cr.poisson(lam[p]));
                }
                for (std::size_t em = 0; em < ensemble.size(); ++em) {
                    if (mc) {
                        Rng rng(derive_seed(seed, {streams::eval, cell, e, em}));
                        forward_net<double>(ensemble[em].spec, ecs[em].pv, img.data(), mode, &rng,
                                            ws, om, ov);
                    } else {
                        forward_net<double>(ensemble[em].spec, ecs[em].pv, img.data(), mode,
                                            nullptr, ws, om, ov);
                    }
                    acc += 0.5 * (ov[0] + ov[1]);
                }
            }
            vm.value[cell] = acc * norm;
        }
    });
    return vm;
}

namespace {

double quantile_sorted(const std::vector<double>& s, double p) {
    const double pos = p * static_cast<double>(s.size() - 1);
    const std::size_t i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < s.size() ? s[i] * (1.0 - f) + s[i + 1] * f : s[i];
}

}  // namespace

std::vector<EvalReport> timing_sweep(const Model& m, std::size_t batch_size,
                                     const std::vector<int>& sample_counts, std::size_t repeats,
                                     std::uint64_t seed, double kappa) {
    if (batch_size < 1) throw ParamError("timing_sweep: batch_size must be >= 1");
    if (repeats < 1) throw ParamError("timing_sweep: repeats must be >= 1");
    m.spec.validate();

    Rng data_rng(derive_seed(seed, {streams::timing}));
    const Dataset batch = m.spec.task == Task::Regression
                              ? make_regression_dataset(batch_size, data_rng, -1.0, 2.0)
                              : make_localization_dataset(batch_size, data_rng, m.spec.sim);
    EvalCache ec;
    ec.build(m);

    auto run_mode = [&](const PropagationMode& mode) {
        mode.validate();
        Workspace<double> ws;
        double om[3], ov[3];
        const bool mc = mode.kind == PropagationMode::Kind::MCVI;
        auto pass = [&](std::size_t rep) {
            for (std::size_t i = 0; i < batch.n; ++i) {
                if (mc) {
                    Rng rng(derive_seed(seed, {streams::timing, rep, i}));
                    forward_net<double>(m.spec, ec.pv, batch.input_row(i), mode, &rng, ws, om,
                                        ov);
                } else {
                    forward_net<double>(m.spec, ec.pv, batch.input_row(i), mode, nullptr, ws, om,
                                        ov);
                }
            }
        };
        pass(0);  // warm-up, untimed
        std::vector<double> ms(repeats);
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            const auto t0 = std::chrono::steady_clock::now();
            pass(rep + 1);
            const auto t1 = std::chrono::steady_clock::now();
            ms[rep] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        std::sort(ms.begin(), ms.end());
        EvalReport rep;
        rep.mode = mode.name();
        rep.samples = mode_sample_count(mode);
        rep.median_ms = quantile_sorted(ms, 0.5);
        rep.iqr_ms = quantile_sorted(ms, 0.75) - quantile_sorted(ms, 0.25);
        return rep;
    };

    std::vector<EvalReport> rows;
    rows.reserve(sample_counts.size() + 1);
    for (int n : sample_counts) rows.push_back(run_mode(PropagationMode::mcvi(n)));
    rows.push_back(run_mode(PropagationMode::utvi(kappa)));
    return rows;
}

std::vector<SweepRow> nll_vs_samples_sweep(const TrainConfig& base,
                                           const std::vector<int>& sample_grid,
                                           const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) throw ParamError("nll_vs_samples_sweep: need at least one seed");
    std::vector<SweepRow> rows;
    auto run_one = [&](PropagationMode::Kind kind, int n, std::uint64_t seed) {
        TrainConfig cfg = base;
        cfg.mode_kind = kind;
        cfg.mc_samples = n > 0 ? n : cfg.mc_samples;
        cfg.seed = seed;
        Model m = build_regression_model();
        const TrainResult r = train(m, cfg);
        SweepRow row;
        row.mode = cfg.mode().name();
        row.samples = mode_sample_count(cfg.mode());
        row.seed = seed;
        row.best_val_nll = r.best_val_nll;
        rows.push_back(row);
    };
    for (std::uint64_t s : seeds) run_one(PropagationMode::Kind::SMP, 0, s);
    for (std::uint64_t s : seeds) run_one(PropagationMode::Kind::UTVI, 0, s);
    for (int n : sample_grid) {
        for (std::uint64_t s : seeds) run_one(PropagationMode::Kind::MCVI, n, s);
    }
    return rows;
}

std::string nll_sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "mode,samples,seed,best_val_nll\n";
    for (const SweepRow& r : rows) {
        out += r.mode;
        out += ',';
        out += std::to_string(r.samples);
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += fmt17(r.best_val_nll);
        out += '\n';
    }
    return out;
}

std::string timing_csv(const std::vector<EvalReport>& rows, std::size_t batch_size) {
    std::string out = "mode,samples,batch,median_ms,iqr_ms\n";
    for (const EvalReport& r : rows) {
        out += r.mode;
        out += ',';
        out += std::to_string(r.samples);
        out += ',';
        out += std::to_string(batch_size);
        out += ',';
        out += fmt17(r.median_ms);
        out += ',';
        out += fmt17(r.iqr_ms);
        out += '\n';
    }
    return out;
}

std::string map_csv(const std::vector<double>& value, const std::vector<std::uint32_t>& count,
                    std::size_t side) {
    if (value.size() != side * side || count.size() != side * side) {
        throw ShapeError("map_csv: value/count size must be side*side");
    }
    std::string out = "row,col,value,count\n";
    for (std::size_t row = 0; row < side; ++row) {
        for (std::size_t col = 0; col < side; ++col) {
            out += std::to_string(row);
            out += ',';
            out += std::to_string(col);
            out += ',';
            out += fmt17(value[row * side + col]);
            out += ',';
            out += std::to_string(count[row * side + col]);
            out += '\n';
        }
    }
    return out;
}

namespace {

void lerp_color(double t, int& r, int& g, int& b) {
    // three-stop ramp, dark blue -> teal -> yellow
    static const double stops[3][3] = {
        {0.267, 0.005, 0.329}, {0.128, 0.565, 0.551}, {0.993, 0.906, 0.144}};
    const double u = t < 0.5 ? t * 2.0 : (t - 0.5) * 2.0;
    const int lo = t < 0.5 ? 0 : 1;
    r = static_cast<int>(255.0 * (stops[lo][0] + u * (stops[lo + 1][0] - stops[lo][0])));
    g = static_cast<int>(255.0 * (stops[lo][1] + u * (stops[lo + 1][1] - stops[lo][1])));
    b = static_cast<int>(255.0 * (stops[lo][2] + u * (stops[lo + 1][2] - stops[lo][2])));
}

}  // namespace

std::string svg_heatmap(const std::vector<double>& value, std::size_t side,
                        const std::string& title) {
    if (value.size() != side * side) throw ShapeError("svg_heatmap: value size must be side*side");
    double vmin = value[0], vmax = value[0];
    for (double v : value) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    const double span = vmax > vmin ? vmax - vmin : 1.0;
    const int cell = 96, top = 28;
    const int w = static_cast<int>(side) * cell, hgt = static_cast<int>(side) * cell + top;
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(hgt) + "\" font-family=\"monospace\">\n";
    s += "<text x=\"4\" y=\"18\" font-size=\"14\">" + title + "</text>\n";
    char hex[8];
    for (std::size_t row = 0; row < side; ++row) {
        for (std::size_t col = 0; col < side; ++col) {
            const double v = value[row * side + col];
            const double t = (v - vmin) / span;
            int r, g, b;
            lerp_color(t, r, g, b);
            std::snprintf(hex, sizeof hex, "#%02x%02x%02x", r, g, b);
            const int x = static_cast<int>(col) * cell;
            const int y = top + static_cast<int>(row) * cell;
            s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" +
                 std::to_string(cell) + "\" height=\"" + std::to_string(cell) + "\" fill=\"" + hex +
                 "\"/>\n";
            s += "<text x=\"" + std::to_string(x + 3) + "\" y=\"" + std::to_string(y + cell / 2) +
                 "\" font-size=\"8\" fill=\"" + (t > 0.6 ? "#000" : "#fff") + "\">" + fmt17(v) +
                 "</text>\n";
        }
    }
    s += "</svg>\n";
    return s;
}

}  // namespace utvi
