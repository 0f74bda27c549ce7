#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <utility>
#include <vector>

#include "utvi/checkpoint.hpp"
#include "utvi/config.hpp"
#include "utvi/datagen.hpp"
#include "utvi/errors.hpp"
#include "utvi/eval.hpp"
#include "utvi/fmtio.hpp"
#include "utvi/kernels.hpp"
#include "utvi/loss.hpp"
#include "utvi/model.hpp"
#include "utvi/moments.hpp"
#include "utvi/normal.hpp"
#include "utvi/rng.hpp"
#include "utvi/sigma_points.hpp"
#include "utvi/train.hpp"

namespace py = pybind11;
using namespace utvi;

namespace {

using Rows = std::vector<std::vector<double>>;

Dataset dataset_from_rows(const Rows& inputs, const Rows& targets) {
    if (inputs.empty() || inputs.size() != targets.size())
        throw ShapeError("inputs and targets must be equal-length and non-empty");
    Dataset d;
    d.n = inputs.size();
    d.input_dim = inputs.front().size();
    d.target_dim = targets.front().size();
    d.inputs.reserve(d.n * d.input_dim);
    d.targets.reserve(d.n * d.target_dim);
    for (std::size_t i = 0; i < d.n; ++i) {
        if (inputs[i].size() != d.input_dim || targets[i].size() != d.target_dim)
            throw ShapeError("ragged input or target rows");
        d.inputs.insert(d.inputs.end(), inputs[i].begin(), inputs[i].end());
        d.targets.insert(d.targets.end(), targets[i].begin(), targets[i].end());
    }
    return d;
}

std::pair<Rows, Rows> rows_from_dataset(const Dataset& d) {
    Rows inputs(d.n), targets(d.n);
    for (std::size_t i = 0; i < d.n; ++i) {
        inputs[i].assign(d.input_row(i), d.input_row(i) + d.input_dim);
        targets[i].assign(d.target_row(i), d.target_row(i) + d.target_dim);
    }
    return {std::move(inputs), std::move(targets)};
}

PropagationMode resolve_mode(const std::string& name, int samples, double kappa) {
    PropagationMode m = parse_mode(name);
    if (m.kind == PropagationMode::Kind::MCVI) return PropagationMode::mcvi(samples);
    if (m.kind == PropagationMode::Kind::UTVI) return PropagationMode::utvi(kappa);
    return m;
}

/// One saved model plus the derived evaluation-side arrays.
class Predictor {
  public:
    explicit Predictor(const std::string& checkpoint_text)
        : ck_(parse_checkpoint(checkpoint_text)) {
        cache_.build(ck_.model);
    }

    // the cache points into ck_; moving keeps the heap buffers, copying would not
    Predictor(const Predictor&) = delete;
    Predictor& operator=(const Predictor&) = delete;
    Predictor(Predictor&&) = default;

    static Predictor from_file(const std::string& path) {
        return Predictor(read_text_file(path));
    }

    std::pair<Rows, Rows> predict(const Rows& inputs, const std::string& mode, int samples,
                                  double kappa, std::uint64_t seed) {
        const PropagationMode m = resolve_mode(mode, samples, kappa);
        const ModelSpec& spec = ck_.model.spec;
        const std::size_t in_dim = spec.input_count(), out_dim = spec.output_count();
        Workspace<double> ws;
        std::vector<double> om(out_dim), ov(out_dim);
        Rows means(inputs.size()), vars(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i].size() != in_dim) throw ShapeError("input row width mismatch");
            if (m.kind == PropagationMode::Kind::MCVI) {
                Rng rng(derive_seed(seed, {streams::eval, 0, i}));
                forward_net<double>(spec, cache_.pv, inputs[i].data(), m, &rng, ws, om.data(),
                                    ov.data());
            } else {
                forward_net<double>(spec, cache_.pv, inputs[i].data(), m, nullptr, ws, om.data(),
                                    ov.data());
            }
            means[i] = om;
            vars[i] = ov;
        }
        return {std::move(means), std::move(vars)};
    }

    double nll(const Rows& inputs, const Rows& targets, const std::string& mode, int samples,
               double kappa, std::uint64_t seed) {
        const Dataset d = dataset_from_rows(inputs, targets);
        return evaluate_nll({ck_.model}, d, resolve_mode(mode, samples, kappa), seed).mean_nll;
    }

    std::string task() const {
        return ck_.model.spec.task == Task::Regression ? "regression" : "localization";
    }
    std::size_t param_count() const { return ck_.model.param_count(); }
    std::size_t epoch() const { return ck_.epoch; }
    std::string to_json() const { return checkpoint_json(ck_); }

  private:
    Checkpoint ck_;
    EvalCache cache_;
};

py::dict train_run(const std::string& config_text, std::uint64_t seed) {
    RunConfig rc = parse_run_config(config_text);
    rc.validate();
    TrainConfig cfg = rc.train;
    cfg.seed = seed;
    Model m = rc.build_model();
    TrainResult res = train(m, cfg);

    Checkpoint best;
    best.config = cfg;
    best.model = m;
    best.model.params = res.best_params;
    best.epoch = res.best_epoch;
    best.best = true;

    py::dict out;
    out["best_val_nll"] = res.best_val_nll;
    out["best_epoch"] = res.best_epoch;
    out["checkpoint_json"] = checkpoint_json(best);
    out["log_csv"] = train_log_csv(res.records);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
    mod.doc() = "deterministic variational inference primitives";

    py::register_exception<ShapeError>(mod, "ShapeError", PyExc_ValueError);
    py::register_exception<ParamError>(mod, "ParamError", PyExc_ValueError);
    py::register_exception<DomainError>(mod, "DomainError", PyExc_ValueError);
    py::register_exception<NumericError>(mod, "NumericError", PyExc_ArithmeticError);
    py::register_exception<ArtifactError>(mod, "ArtifactError", PyExc_RuntimeError);

    mod.def(
        "sigma_points",
        [](double mu, double sigma2, double kappa) {
            SigmaPointSet s = make_sigma_points(mu, sigma2, kappa);
            return std::make_pair(s.points, s.weights);
        },
        py::arg("mu"), py::arg("sigma2"), py::arg("kappa") = 2.0,
        "3-point unscented set: ((chi0, chi1, chi2), (gamma0, gamma1, gamma2))");

    mod.def(
        "product_moments",
        [](double mx, double vx, double my, double vy) {
            GaussianTensor r = independent_product_moments(GaussianTensor({1}, {mx}, {vx}),
                                                           GaussianTensor({1}, {my}, {vy}));
            return std::make_pair(r.mean[0], r.variance[0]);
        },
        py::arg("mx"), py::arg("vx"), py::arg("my"), py::arg("vy"),
        "Mean and variance of the product of two independent Gaussians");

    mod.def(
        "ut_propagate",
        [](double mean, double variance, const std::function<double(double)>& f, double kappa) {
            double om = 0.0, ov = 0.0;
            ut_propagate_scalar(mean, variance, f, kappa, om, ov);
            return std::make_pair(om, ov);
        },
        py::arg("mean"), py::arg("variance"), py::arg("f"), py::arg("kappa") = 2.0,
        "Unscented propagation of a scalar function");

    mod.def(
        "smp_leaky_relu",
        [](double mean, double variance, double alpha) {
            double om = 0.0, ov = 0.0;
            smp_leaky_relu_kernel(&mean, &variance, 1, alpha, &om, &ov);
            return std::make_pair(om, ov);
        },
        py::arg("mean"), py::arg("variance"), py::arg("alpha") = 0.01,
        "Closed-form leaky-ReLU output moments");

    mod.def("normal_cdf", [](double z) { return normal_cdf(z); }, py::arg("z"));
    mod.def("normal_inv_cdf", [](double p) { return normal_inv_cdf(p); }, py::arg("p"));
    mod.def("softplus", [](double x) { return softplus(x); }, py::arg("x"));
    mod.def("sigmoid", [](double x) { return sigmoid(x); }, py::arg("x"));
    mod.def("kl_scale", &kl_scale, py::arg("epoch"), py::arg("epochs"),
            "Exponential KL annealing factor for 1-based epoch l of M");
    mod.def(
        "gaussian_nll",
        [](const std::vector<double>& mean, const std::vector<double>& var,
           const std::vector<double>& target) {
            return gaussian_nll(GaussianTensor({mean.size()}, mean, var), target);
        },
        py::arg("mean"), py::arg("var"), py::arg("target"));

    mod.def(
        "regression_dataset",
        [](std::size_t n, std::uint64_t seed, double x_low, double x_high) {
            Rng rng(derive_seed(seed, {streams::fixed}));
            return rows_from_dataset(make_regression_dataset(n, rng, x_low, x_high));
        },
        py::arg("n"), py::arg("seed"), py::arg("x_low") = -1.0, py::arg("x_high") = 2.0);

    mod.def(
        "localization_dataset",
        [](std::size_t n, std::uint64_t seed) {
            SimParams sim;
            Rng rng(derive_seed(seed, {streams::fixed}));
            return rows_from_dataset(make_localization_dataset(n, rng, sim));
        },
        py::arg("n"), py::arg("seed"));

    mod.def(
        "expected_image",
        [](double x, double y) {
            SimParams sim;
            return expected_image(x, y, sim);
        },
        py::arg("x"), py::arg("y"), "Expected pixel counts for an emitter at (x, y)");

    mod.def(
        "expected_in_frame_count",
        [](double x, double y) {
            SimParams sim;
            return expected_in_frame_count(x, y, sim);
        },
        py::arg("x"), py::arg("y"));

    py::class_<Predictor>(mod, "Predictor")
        .def(py::init<const std::string&>(), py::arg("checkpoint_json"))
        .def_static("from_file", &Predictor::from_file, py::arg("path"))
        .def("predict", &Predictor::predict, py::arg("inputs"), py::arg("mode") = "utvi",
             py::arg("samples") = 3, py::arg("kappa") = 2.0, py::arg("seed") = 0,
             "Per-row predictive means and variances")
        .def("nll", &Predictor::nll, py::arg("inputs"), py::arg("targets"),
             py::arg("mode") = "utvi", py::arg("samples") = 3, py::arg("kappa") = 2.0,
             py::arg("seed") = 0)
        .def_property_readonly("task", &Predictor::task)
        .def_property_readonly("param_count", &Predictor::param_count)
        .def_property_readonly("epoch", &Predictor::epoch)
        .def("to_json", &Predictor::to_json);

    mod.def("train_run", &train_run, py::arg("config_json"), py::arg("seed") = 1,
            "Full training run; returns best NLL, epoch, checkpoint JSON, and the log CSV");
}
