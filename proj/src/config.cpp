#include "utvi/config.hpp"

#include <json.hpp>

#include "utvi/fmtio.hpp"

namespace utvi {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    if (!j.is_object()) throw ParamError(std::string("config: ") + where + " must be an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ParamError(std::string("config: unknown key '") + item.key() + "' in " + where);
        }
    }
}

template <class T>
void opt(const json& j, const char* key, T& dst) {
    const auto it = j.find(key);
    if (it != j.end()) dst = it->get<T>();
}

void parse_train(const json& j, TrainConfig& t) {
    check_keys(j,
               {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "epochs",
                "batches_per_epoch", "batch_size", "kappa", "mc_samples", "prior_sigma",
                "kl_weight", "val_size", "val_seed", "fixed_dataset_size", "x_low", "x_high",
                "deterministic_weights"},
               "train");
    opt(j, "learning_rate", t.learning_rate);
    opt(j, "beta1", t.beta1);
    opt(j, "beta2", t.beta2);
    opt(j, "epsilon", t.epsilon);
    opt(j, "weight_decay", t.weight_decay);
    opt(j, "epochs", t.epochs);
    opt(j, "batches_per_epoch", t.batches_per_epoch);
    opt(j, "batch_size", t.batch_size);
    opt(j, "kappa", t.kappa);
    opt(j, "mc_samples", t.mc_samples);
    opt(j, "prior_sigma", t.prior_sigma);
    opt(j, "kl_weight", t.kl_weight);
    opt(j, "val_size", t.val_size);
    opt(j, "val_seed", t.val_seed);
    opt(j, "fixed_dataset_size", t.fixed_dataset_size);
    opt(j, "x_low", t.x_low);
    opt(j, "x_high", t.x_high);
    opt(j, "deterministic_weights", t.deterministic_weights);
}

void parse_sim(const json& j, SimParams& s) {
    check_keys(j, {"n_photons", "side", "sigma_b", "sigma_r", "wavelength_px", "na"}, "sim");
    opt(j, "n_photons", s.n_photons);
    opt(j, "side", s.side);
    opt(j, "sigma_b", s.sigma_b);
    opt(j, "sigma_r", s.sigma_r);
    opt(j, "wavelength_px", s.wavelength_px);
    opt(j, "na", s.na);
}

}  // namespace

void RunConfig::validate() const {
    if (seeds.empty()) throw ParamError("config: seeds must be non-empty");
    if (out_dir.empty()) throw ParamError("config: out_dir must be non-empty");
    if (!(alpha_leak >= 0.0 && alpha_leak < 1.0)) {
        throw ParamError("config: alpha_leak must be in [0, 1)");
    }
    train.validate();
    sim.validate();
}

Model RunConfig::build_model() const {
    if (task == Task::Regression) return build_regression_model(alpha_leak);
    return build_localizer_model(sim, alpha_leak, output_heads);
}

RunConfig parse_run_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParamError(std::string("config: parse failure: ") + e.what());
    }
    try {
        check_keys(j,
                   {"task", "mode", "seeds", "out_dir", "alpha_leak", "output_heads", "train",
                    "sim"},
                   "config");
        RunConfig rc;
        if (const auto it = j.find("task"); it != j.end()) {
            const std::string s = it->get<std::string>();
            if (s == "regression") {
                rc.task = Task::Regression;
            } else if (s == "localization") {
                rc.task = Task::Localization;
            } else {
                throw ParamError("config: unknown task '" + s + "'");
            }
        }
        if (const auto it = j.find("mode"); it != j.end()) {
            rc.train.mode_kind = parse_mode(it->get<std::string>()).kind;
        }
        opt(j, "seeds", rc.seeds);
        opt(j, "out_dir", rc.out_dir);
        opt(j, "alpha_leak", rc.alpha_leak);
        opt(j, "output_heads", rc.output_heads);
        if (const auto it = j.find("train"); it != j.end()) parse_train(*it, rc.train);
        if (const auto it = j.find("sim"); it != j.end()) parse_sim(*it, rc.sim);
        return rc;
    } catch (const json::exception& e) {
        throw ParamError(std::string("config: malformed field: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(read_text_file(path));
}

std::string run_config_json(const RunConfig& rc) {
    const TrainConfig& t = rc.train;
    std::string out = "{\n";
    auto kv = [&out](const char* indent, const char* key, const std::string& val, bool comma) {
        out += indent;
        out += '"';
        out += key;
        out += "\": ";
        out += val;
        out += comma ? ",\n" : "\n";
    };
    kv("  ", "task", rc.task == Task::Regression ? "\"regression\"" : "\"localization\"", true);
    kv("  ", "mode", std::string("\"") + t.mode().name() + "\"", true);
    std::string seeds = "[";
    for (std::size_t i = 0; i < rc.seeds.size(); ++i) {
        if (i) seeds += ',';
        seeds += std::to_string(rc.seeds[i]);
    }
    seeds += ']';
    kv("  ", "seeds", seeds, true);
    kv("  ", "out_dir", '"' + rc.out_dir + '"', true);
    kv("  ", "alpha_leak", fmt17(rc.alpha_leak), true);
    kv("  ", "output_heads", rc.output_heads ? "true" : "false", true);
    out += "  \"train\": {\n";
    kv("    ", "learning_rate", fmt17(t.learning_rate), true);
    kv("    ", "beta1", fmt17(t.beta1), true);
    kv("    ", "beta2", fmt17(t.beta2), true);
    kv("    ", "epsilon", fmt17(t.epsilon), true);
    kv("    ", "weight_decay", fmt17(t.weight_decay), true);
    kv("    ", "epochs", std::to_string(t.epochs), true);
    kv("    ", "batches_per_epoch", std::to_string(t.batches_per_epoch), true);
    kv("    ", "batch_size", std::to_string(t.batch_size), true);
    kv("    ", "kappa", fmt17(t.kappa), true);
    kv("    ", "mc_samples", std::to_string(t.mc_samples), true);
    kv("    ", "prior_sigma", fmt17(t.prior_sigma), true);
    kv("    ", "kl_weight", fmt17(t.kl_weight), true);
    kv("    ", "val_size", std::to_string(t.val_size), true);
    kv("    ", "val_seed", std::to_string(t.val_seed), true);
    kv("    ", "fixed_dataset_size", std::to_string(t.fixed_dataset_size), true);
    kv("    ", "x_low", fmt17(t.x_low), true);
    kv("    ", "x_high", fmt17(t.x_high), true);
    kv("    ", "deterministic_weights", t.deterministic_weights ? "true" : "false", false);
    out += "  },\n";
    out += "  \"sim\": {\n";
    kv("    ", "n_photons", fmt17(rc.sim.n_photons), true);
    kv("    ", "side", std::to_string(rc.sim.side), true);
    kv("    ", "sigma_b", fmt17(rc.sim.sigma_b), true);
    kv("    ", "sigma_r", fmt17(rc.sim.sigma_r), true);
    kv("    ", "wavelength_px", fmt17(rc.sim.wavelength_px), true);
    kv("    ", "na", fmt17(rc.sim.na), false);
    out += "  }\n";
    out += "}\n";
    return out;
}

}  // namespace utvi
