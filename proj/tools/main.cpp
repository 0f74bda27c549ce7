#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "utvi/checkpoint.hpp"
#include "utvi/config.hpp"
#include "utvi/datagen.hpp"
#include "utvi/errors.hpp"
#include "utvi/eval.hpp"
#include "utvi/fmtio.hpp"
#include "utvi/model.hpp"
#include "utvi/rng.hpp"
#include "utvi/train.hpp"

namespace fs = std::filesystem;
using namespace utvi;

namespace {

// Flag values shared across subcommands; unset optionals leave the config
// file (or defaults) in charge.
struct Flags {
    std::string config_path;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> task;
    std::optional<std::string> mode;
    std::optional<int> samples;
    std::optional<double> kappa;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> batch;
    std::optional<std::size_t> dataset_size;
    std::optional<double> lr;
    std::optional<bool> heads;
};

Task parse_task(const std::string& s) {
    if (s == "regression") return Task::Regression;
    if (s == "localization") return Task::Localization;
    throw ParamError("unknown task '" + s + "' (expected regression|localization)");
}

const char* task_name(Task t) {
    return t == Task::Regression ? "regression" : "localization";
}

RunConfig resolve_config(const Flags& f) {
    RunConfig rc;
    if (!f.config_path.empty()) rc = load_run_config(f.config_path);
    if (f.task) rc.task = parse_task(*f.task);
    if (f.mode) rc.train.mode_kind = parse_mode(*f.mode).kind;
    if (f.samples) rc.train.mc_samples = *f.samples;
    if (f.kappa) rc.train.kappa = *f.kappa;
    if (f.epochs) rc.train.epochs = *f.epochs;
    if (f.batch) rc.train.batch_size = *f.batch;
    if (f.dataset_size) rc.train.fixed_dataset_size = *f.dataset_size;
    if (f.lr) rc.train.learning_rate = *f.lr;
    if (f.heads) rc.output_heads = *f.heads;
    if (f.seed) rc.seeds = {*f.seed};
    if (!f.out.empty()) rc.out_dir = f.out;
    rc.validate();
    return rc;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ArtifactError("cannot create directory " + dir.string() + ": " + ec.message());
}

bool spec_equal(const ModelSpec& a, const ModelSpec& b) {
    if (a.task != b.task || a.alpha_leak != b.alpha_leak || a.output_heads != b.output_heads ||
        a.layers.size() != b.layers.size())
        return false;
    if (a.sim.n_photons != b.sim.n_photons || a.sim.side != b.sim.side ||
        a.sim.sigma_b != b.sim.sigma_b || a.sim.sigma_r != b.sim.sigma_r)
        return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        const LayerShape &x = a.layers[i], &y = b.layers[i];
        if (x.kind != y.kind || x.in != y.in || x.out != y.out || x.in_ch != y.in_ch ||
            x.out_ch != y.out_ch || x.k != y.k || x.stride != y.stride || x.H != y.H ||
            x.W != y.W || x.act_after != y.act_after)
            return false;
    }
    return true;
}

std::vector<Model> load_ensemble(const std::vector<std::string>& paths,
                                 std::vector<Checkpoint>& cks) {
    std::vector<Model> models;
    for (const auto& p : paths) {
        cks.push_back(load_checkpoint(p));
        models.push_back(cks.back().model);
    }
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (!spec_equal(models[i].spec, models.front().spec))
            throw ArtifactError("ensemble architecture mismatch: " + paths[i] +
                                " differs from " + paths[0]);
    }
    return models;
}

int run_gen(const Flags& f, std::size_t n) {
    if (!f.task && f.config_path.empty()) throw ParamError("gen: missing --task");
    RunConfig rc = resolve_config(f);
    const std::uint64_t seed = f.seed ? *f.seed : rc.seeds.front();

    Rng rng(derive_seed(seed, {streams::fixed}));
    Dataset d = rc.task == Task::Regression
                    ? make_regression_dataset(n, rng, rc.train.x_low, rc.train.x_high)
                    : make_localization_dataset(n, rng, rc.sim);

    fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
    if (out.extension() != ".csv") out /= std::string(task_name(rc.task)) + ".csv";
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    if (rc.task == Task::Regression)
        write_regression_csv(out.string(), d);
    else
        write_localization_csv(out.string(), d);
    std::printf("wrote %zu rows to %s (seed %llu)\n", d.n, out.string().c_str(),
                (unsigned long long)seed);
    return 0;
}

int run_train(const Flags& f) {
    RunConfig rc = resolve_config(f);
    const fs::path out(rc.out_dir);
    ensure_dir(out);
    write_text_file((out / "config.json").string(), run_config_json(rc));

    for (std::uint64_t seed : rc.seeds) {
        const fs::path sub = out / ("seed" + std::to_string(seed));
        ensure_dir(sub);
        TrainConfig cfg = rc.train;
        cfg.seed = seed;
        Model m = rc.build_model();
        TrainResult res;
        try {
            res = train(m, cfg);
        } catch (const NumericError& e) {
            std::string diag = "training aborted: ";
            diag += e.what();
            if (!e.where.empty()) diag += "\nat: " + e.where;
            diag += "\nseed: " + std::to_string(seed) + "\n";
            write_text_file((sub / "diagnostics.txt").string(), diag);
            std::fprintf(stderr, "error: %s (diagnostics in %s)\n", e.what(),
                         (sub / "diagnostics.txt").string().c_str());
            return 3;
        }
        write_text_file((sub / "train_log.csv").string(), train_log_csv(res.records));

        Checkpoint best;
        best.config = cfg;
        best.model = m;
        best.model.params = res.best_params;
        best.epoch = res.best_epoch;
        best.best = true;
        save_checkpoint((sub / "checkpoint_best.json").string(), best);

        Checkpoint last;
        last.config = cfg;
        last.model = m;
        last.epoch = cfg.epochs;
        save_checkpoint((sub / "checkpoint_final.json").string(), last);

        std::printf("seed %llu: best val nll %.6f at epoch %zu -> %s\n",
                    (unsigned long long)seed, res.best_val_nll, res.best_epoch,
                    sub.string().c_str());
    }
    return 0;
}

int run_eval(const Flags& f, const std::vector<std::string>& model_paths,
             const std::string& data_path) {
    std::vector<Checkpoint> cks;
    std::vector<Model> models = load_ensemble(model_paths, cks);
    const Task task = models.front().spec.task;

    Dataset data = task == Task::Regression ? read_regression_csv(data_path)
                                            : read_localization_csv(data_path);

    PropagationMode mode = f.mode ? parse_mode(*f.mode) : cks.front().config.mode();
    if (f.samples && mode.kind == PropagationMode::Kind::MCVI)
        mode = PropagationMode::mcvi(*f.samples);
    if (f.kappa && mode.kind == PropagationMode::Kind::UTVI)
        mode = PropagationMode::utvi(*f.kappa);
    const std::uint64_t seed = f.seed ? *f.seed : 1;

    EvalReport rep = evaluate_nll(models, data, mode, seed);

    fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
    ensure_dir(out);
    std::string json = "{\n";
    json += "  \"mode\": \"" + rep.mode + "\",\n";
    json += "  \"samples\": " + std::to_string(rep.samples) + ",\n";
    json += "  \"members\": " + std::to_string(models.size()) + ",\n";
    json += "  \"n\": " + std::to_string(data.n) + ",\n";
    json += "  \"mean_nll\": " + fmt17(rep.mean_nll) + "\n}\n";
    write_text_file((out / "metrics.json").string(), json);
    std::printf("%s@%d mean nll %.6f over %zu points (%zu members) -> %s\n", rep.mode.c_str(),
                rep.samples, rep.mean_nll, data.n, models.size(),
                (out / "metrics.json").string().c_str());
    return 0;
}

int run_bench(const Flags& f, const std::string& model_path, std::size_t batch,
              const std::vector<int>& samples, std::size_t repeats) {
    Model m;
    if (!model_path.empty()) {
        m = load_checkpoint(model_path).model;
    } else {
        RunConfig rc = resolve_config(f);
        m = rc.build_model();
        Rng rng(derive_seed(f.seed ? *f.seed : 1, {streams::init}));
        m.init_params(rng);
    }
    const std::uint64_t seed = f.seed ? *f.seed : 1;
    const double kappa = f.kappa ? *f.kappa : 2.0;

    std::vector<EvalReport> rows = timing_sweep(m, batch, samples, repeats, seed, kappa);

    fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
    ensure_dir(out);
    write_text_file((out / "timing.csv").string(), timing_csv(rows, batch));
    for (const auto& r : rows)
        std::printf("%-5s samples %3d  median %9.3f ms  iqr %8.3f ms\n", r.mode.c_str(),
                    r.samples, r.median_ms, r.iqr_ms);
    std::printf("wrote %s\n", (out / "timing.csv").string().c_str());
    return 0;
}

int run_maps(const Flags& f, const std::vector<std::string>& model_paths, std::size_t per_pixel,
             bool svg) {
    std::vector<Checkpoint> cks;
    std::vector<Model> models = load_ensemble(model_paths, cks);
    if (models.front().spec.task != Task::Localization)
        throw ArtifactError("maps requires localization checkpoints");
    const SimParams& sim = models.front().spec.sim;
    const std::size_t side = sim.side;

    PropagationMode mode = f.mode ? parse_mode(*f.mode) : PropagationMode::utvi();
    const std::uint64_t seed = f.seed ? *f.seed : 1;

    VarianceMap vm = variance_map(models, sim, mode, per_pixel, seed);
    std::vector<double> crb = crb_map(sim, per_pixel);
    const std::size_t grid = (std::size_t)std::ceil(std::sqrt((double)per_pixel));
    std::vector<std::uint32_t> crb_count(side * side, (std::uint32_t)(grid * grid));

    fs::path out = f.out.empty() ? fs::path("out") : fs::path(f.out);
    ensure_dir(out);
    write_text_file((out / "varmap.csv").string(), map_csv(vm.value, vm.count, side));
    write_text_file((out / "crbmap.csv").string(), map_csv(crb, crb_count, side));
    if (svg) {
        write_text_file((out / "varmap.svg").string(),
                        svg_heatmap(vm.value, side, "predicted variance (px^2)"));
        write_text_file((out / "crbmap.svg").string(), svg_heatmap(crb, side, "CRB (px^2)"));
    }
    const std::size_t c = side / 2;
    std::printf("varmap center %.6f px^2, crb center %.6f px^2, %zux%zu cells -> %s\n",
                vm.value[c * side + c], crb[c * side + c], side, side, out.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic variational inference for Bayesian networks"};
    app.require_subcommand(1);
    Flags f;

    auto add_common = [&f](CLI::App* cmd) {
        cmd->add_option("--config", f.config_path, "JSON run configuration");
        cmd->add_option("--seed", f.seed, "replicate seed (overrides the config seed list)");
        cmd->add_option("--out", f.out, "output directory");
    };

    auto* gen = app.add_subcommand("gen", "generate a dataset CSV");
    add_common(gen);
    std::size_t gen_n = 1024;
    gen->add_option("--task", f.task, "regression|localization");
    gen->add_option("--n", gen_n, "number of rows");

    auto* train_cmd = app.add_subcommand("train", "train one model per seed");
    add_common(train_cmd);
    train_cmd->add_option("--task", f.task, "regression|localization");
    train_cmd->add_option("--mode", f.mode, "smp|utvi|mcvi");
    train_cmd->add_option("--samples", f.samples, "MCVI sample count");
    train_cmd->add_option("--kappa", f.kappa, "UT scaling parameter");
    train_cmd->add_option("--epochs", f.epochs, "training epochs");
    train_cmd->add_option("--batch", f.batch, "batch size");
    train_cmd->add_option("--dataset-size", f.dataset_size,
                          "train on a fixed dataset of this size (0 = fresh batches)");
    train_cmd->add_option("--lr", f.lr, "learning rate");
    train_cmd->add_flag("--heads,!--no-heads", f.heads, "localizer output heads");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate checkpoints on a dataset");
    add_common(eval_cmd);
    std::vector<std::string> eval_models;
    std::string eval_data;
    eval_cmd->add_option("--model", eval_models, "checkpoint path (repeat for an ensemble)")
        ->required();
    eval_cmd->add_option("--data", eval_data, "dataset CSV")->required();
    eval_cmd->add_option("--mode", f.mode, "smp|utvi|mcvi (default: checkpoint mode)");
    eval_cmd->add_option("--samples", f.samples, "MCVI sample count");
    eval_cmd->add_option("--kappa", f.kappa, "UT scaling parameter");

    auto* bench = app.add_subcommand("bench", "forward-pass timing sweep");
    add_common(bench);
    std::string bench_model;
    std::size_t bench_batch = 1024, bench_repeats = 10;
    std::vector<int> bench_samples{3, 8, 32, 128};
    bench->add_option("--model", bench_model, "checkpoint path (default: fresh init)");
    bench->add_option("--task", f.task, "regression|localization (when no --model)");
    bench->add_option("--batch", bench_batch, "batch size");
    bench->add_option("--samples", bench_samples, "MCVI sample counts")->delimiter(',');
    bench->add_option("--repeats", bench_repeats, "timed repeats per row");
    bench->add_option("--kappa", f.kappa, "UT scaling parameter");

    auto* maps = app.add_subcommand("maps", "variance and CRB maps over the pixel grid");
    add_common(maps);
    std::vector<std::string> maps_models;
    std::size_t per_pixel = 1024;
    bool maps_svg = false;
    maps->add_option("--model", maps_models, "localizer checkpoint (repeat for an ensemble)")
        ->required();
    maps->add_option("--per-pixel", per_pixel, "emitters per pixel cell");
    maps->add_option("--mode", f.mode, "smp|utvi|mcvi");
    maps->add_option("--samples", f.samples, "MCVI sample count");
    maps->add_flag("--svg", maps_svg, "also write SVG heatmaps");

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return run_gen(f, gen_n);
        if (train_cmd->parsed()) return run_train(f);
        if (eval_cmd->parsed()) return run_eval(f, eval_models, eval_data);
        if (bench->parsed()) return run_bench(f, bench_model, bench_batch, bench_samples,
                                              bench_repeats);
        if (maps->parsed()) return run_maps(f, maps_models, per_pixel, maps_svg);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ParamError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const ArtifactError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 4;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s%s%s\n", e.what(), e.where.empty() ? "" : " at ",
                     e.where.c_str());
        return 3;
    } catch (const DomainError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
