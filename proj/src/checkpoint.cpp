#include "utvi/checkpoint.hpp"

#include <json.hpp>

#include "utvi/fmtio.hpp"

namespace utvi {

namespace {

using nlohmann::json;

constexpr const char* kFormatTag = "utvi-checkpoint-1";

const char* task_name(Task t) { return t == Task::Regression ? "regression" : "localization"; }

Task parse_task(const std::string& s) {
    if (s == "regression") return Task::Regression;
    if (s == "localization") return Task::Localization;
    throw ArtifactError("checkpoint: unknown task '" + s + "'");
}

const char* mode_name(PropagationMode::Kind k) {
    switch (k) {
        case PropagationMode::Kind::SMP: return "smp";
        case PropagationMode::Kind::UTVI: return "utvi";
        case PropagationMode::Kind::MCVI: return "mcvi";
    }
    return "utvi";
}

void append_array(std::string& out, const char* key, const double* v, std::size_t n,
                  bool trailing_comma) {
    out += "    \"";
    out += key;
    out += "\": [";
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ',';
        out += fmt17(v[i]);
    }
    out += trailing_comma ? "],\n" : "]\n";
}

void kv(std::string& out, const char* indent, const char* key, const std::string& val,
        bool comma = true) {
    out += indent;
    out += '"';
    out += key;
    out += "\": ";
    out += val;
    out += comma ? ",\n" : "\n";
}

std::string quoted(const std::string& s) { return '"' + s + '"'; }

// Strict-access helpers. nlohmann's own exceptions are wrapped at the entry
// points; these add key-set and shape checks it cannot do.

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const char* a : allowed) {
            if (item.key() == a) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            throw ArtifactError(std::string("checkpoint: unknown key '") + item.key() + "' in " +
                                where);
        }
    }
}

const json& need(const json& j, const char* key, const char* where) {
    const auto it = j.find(key);
    if (it == j.end()) {
        throw ArtifactError(std::string("checkpoint: missing key '") + key + "' in " + where);
    }
    return *it;
}

void read_array(const json& j, const char* key, const char* where, double* dst, std::size_t n) {
    const json& a = need(j, key, where);
    if (!a.is_array() || a.size() != n) {
        throw ArtifactError(std::string("checkpoint: '") + key + "' in " + where + " must be " +
                            std::to_string(n) + " numbers");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!a[i].is_number()) {
            throw ArtifactError(std::string("checkpoint: non-numeric entry in '") + key + "'");
        }
        dst[i] = a[i].get<double>();
    }
}

}  // namespace

std::string checkpoint_json(const Checkpoint& ck) {
    const Model& m = ck.model;
    const TrainConfig& c = ck.config;
    std::string out = "{\n";
    kv(out, "  ", "format", quoted(kFormatTag));
    kv(out, "  ", "task", quoted(task_name(m.spec.task)));
    kv(out, "  ", "epoch", std::to_string(ck.epoch));
    kv(out, "  ", "best", ck.best ? "true" : "false");
    out += "  \"rng\": {\n";
    kv(out, "    ", "root_seed", std::to_string(c.seed));
    kv(out, "    ", "epochs_completed", std::to_string(ck.epoch), false);
    out += "  },\n";
    out += "  \"train\": {\n";
    kv(out, "    ", "learning_rate", fmt17(c.learning_rate));
    kv(out, "    ", "beta1", fmt17(c.beta1));
    kv(out, "    ", "beta2", fmt17(c.beta2));
    kv(out, "    ", "epsilon", fmt17(c.epsilon));
    kv(out, "    ", "weight_decay", fmt17(c.weight_decay));
    kv(out, "    ", "epochs", std::to_string(c.epochs));
    kv(out, "    ", "batches_per_epoch", std::to_string(c.batches_per_epoch));
    kv(out, "    ", "batch_size", std::to_string(c.batch_size));
    kv(out, "    ", "mode", quoted(mode_name(c.mode_kind)));
    kv(out, "    ", "kappa", fmt17(c.kappa));
    kv(out, "    ", "mc_samples", std::to_string(c.mc_samples));
    kv(out, "    ", "seed", std::to_string(c.seed));
    kv(out, "    ", "prior_sigma", fmt17(c.prior_sigma));
    kv(out, "    ", "kl_weight", fmt17(c.kl_weight));
    kv(out, "    ", "val_size", std::to_string(c.val_size));
    kv(out, "    ", "val_seed", std::to_string(c.val_seed));
    kv(out, "    ", "fixed_dataset_size", std::to_string(c.fixed_dataset_size));
    kv(out, "    ", "x_low", fmt17(c.x_low));
    kv(out, "    ", "x_high", fmt17(c.x_high));
    kv(out, "    ", "deterministic_weights", c.deterministic_weights ? "true" : "false", false);
    out += "  },\n";
    kv(out, "  ", "alpha_leak", fmt17(m.spec.alpha_leak));
    kv(out, "  ", "output_heads", m.spec.output_heads ? "true" : "false");
    out += "  \"sim\": {\n";
    kv(out, "    ", "n_photons", fmt17(m.spec.sim.n_photons));
    kv(out, "    ", "side", std::to_string(m.spec.sim.side));
    kv(out, "    ", "sigma_b", fmt17(m.spec.sim.sigma_b));
    kv(out, "    ", "sigma_r", fmt17(m.spec.sim.sigma_r));
    kv(out, "    ", "wavelength_px", fmt17(m.spec.sim.wavelength_px));
    kv(out, "    ", "na", fmt17(m.spec.sim.na), false);
    out += "  },\n";
    out += "  \"layers\": [\n";
    for (std::size_t li = 0; li < m.spec.layers.size(); ++li) {
        const LayerShape& l = m.spec.layers[li];
        const LayerOffsets& o = m.offsets[li];
        out += "  {\n";
        if (l.kind == LayerKind::Linear) {
            kv(out, "    ", "kind", quoted("linear"));
            kv(out, "    ", "in", std::to_string(l.in));
            kv(out, "    ", "out", std::to_string(l.out));
        } else {
            kv(out, "    ", "kind", quoted("conv2d"));
            kv(out, "    ", "in_ch", std::to_string(l.in_ch));
            kv(out, "    ", "out_ch", std::to_string(l.out_ch));
            kv(out, "    ", "k", std::to_string(l.k));
            kv(out, "    ", "stride", std::to_string(l.stride));
            kv(out, "    ", "h", std::to_string(l.H));
            kv(out, "    ", "w", std::to_string(l.W));
        }
        kv(out, "    ", "act", l.act_after ? "true" : "false");
        append_array(out, "weight_mean", m.params.data() + o.wm, l.weight_count(), true);
        append_array(out, "weight_rho", m.params.data() + o.wrho, l.weight_count(), true);
        append_array(out, "bias_mean", m.params.data() + o.bm, l.bias_count(), true);
        append_array(out, "bias_rho", m.params.data() + o.brho, l.bias_count(), false);
        out += li + 1 < m.spec.layers.size() ? "  },\n" : "  }\n";
    }
    out += "  ],\n";
    if (m.spec.has_heads()) {
        out += "  \"heads\": {\n";
        kv(out, "    ", "a_pos_raw", fmt17(m.params[m.a_pos_off]));
        kv(out, "    ", "a_phot_raw", fmt17(m.params[m.a_phot_off]), false);
        out += "  },\n";
    }
    kv(out, "  ", "param_count", std::to_string(m.param_count()), false);
    out += "}\n";
    return out;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    write_text_file(path, checkpoint_json(ck));
}

Checkpoint parse_checkpoint(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("checkpoint: parse failure: ") + e.what());
    }
    try {
        check_keys(j,
                   {"format", "task", "epoch", "best", "rng", "train", "alpha_leak",
                    "output_heads", "sim", "layers", "heads", "param_count"},
                   "checkpoint");
        if (need(j, "format", "checkpoint").get<std::string>() != kFormatTag) {
            throw ArtifactError("checkpoint: unsupported format tag");
        }

        Checkpoint ck;
        ck.epoch = need(j, "epoch", "checkpoint").get<std::size_t>();
        ck.best = need(j, "best", "checkpoint").get<bool>();

        const json& jr = need(j, "rng", "checkpoint");
        check_keys(jr, {"root_seed", "epochs_completed"}, "rng");
        need(jr, "root_seed", "rng");
        need(jr, "epochs_completed", "rng");

        const json& jt = need(j, "train", "checkpoint");
        check_keys(jt,
                   {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "epochs",
                    "batches_per_epoch", "batch_size", "mode", "kappa", "mc_samples", "seed",
                    "prior_sigma", "kl_weight", "val_size", "val_seed", "fixed_dataset_size",
                    "x_low", "x_high", "deterministic_weights"},
                   "train");
        TrainConfig& c = ck.config;
        c.learning_rate = need(jt, "learning_rate", "train").get<double>();
        c.beta1 = need(jt, "beta1", "train").get<double>();
        c.beta2 = need(jt, "beta2", "train").get<double>();
        c.epsilon = need(jt, "epsilon", "train").get<double>();
        c.weight_decay = need(jt, "weight_decay", "train").get<double>();
        c.epochs = need(jt, "epochs", "train").get<std::size_t>();
        c.batches_per_epoch = need(jt, "batches_per_epoch", "train").get<std::size_t>();
        c.batch_size = need(jt, "batch_size", "train").get<std::size_t>();
        c.mode_kind = parse_mode(need(jt, "mode", "train").get<std::string>()).kind;
        c.kappa = need(jt, "kappa", "train").get<double>();
        c.mc_samples = need(jt, "mc_samples", "train").get<int>();
        c.seed = need(jt, "seed", "train").get<std::uint64_t>();
        c.prior_sigma = need(jt, "prior_sigma", "train").get<double>();
        c.kl_weight = need(jt, "kl_weight", "train").get<double>();
        c.val_size = need(jt, "val_size", "train").get<std::size_t>();
        c.val_seed = need(jt, "val_seed", "train").get<std::uint64_t>();
        c.fixed_dataset_size = need(jt, "fixed_dataset_size", "train").get<std::size_t>();
        c.x_low = need(jt, "x_low", "train").get<double>();
        c.x_high = need(jt, "x_high", "train").get<double>();
        c.deterministic_weights = need(jt, "deterministic_weights", "train").get<bool>();

        ModelSpec spec;
        spec.task = parse_task(need(j, "task", "checkpoint").get<std::string>());
        spec.alpha_leak = need(j, "alpha_leak", "checkpoint").get<double>();
        spec.output_heads = need(j, "output_heads", "checkpoint").get<bool>();
        const json& js = need(j, "sim", "checkpoint");
        check_keys(js, {"n_photons", "side", "sigma_b", "sigma_r", "wavelength_px", "na"}, "sim");
        spec.sim.n_photons = need(js, "n_photons", "sim").get<double>();
        spec.sim.side = need(js, "side", "sim").get<std::size_t>();
        spec.sim.sigma_b = need(js, "sigma_b", "sim").get<double>();
        spec.sim.sigma_r = need(js, "sigma_r", "sim").get<double>();
        spec.sim.wavelength_px = need(js, "wavelength_px", "sim").get<double>();
        spec.sim.na = need(js, "na", "sim").get<double>();

        const json& jl = need(j, "layers", "checkpoint");
        if (!jl.is_array() || jl.empty()) {
            throw ArtifactError("checkpoint: 'layers' must be a non-empty array");
        }
        for (const json& e : jl) {
            LayerShape l;
            const std::string kind = need(e, "kind", "layer").get<std::string>();
            if (kind == "linear") {
                check_keys(e,
                           {"kind", "in", "out", "act", "weight_mean", "weight_rho", "bias_mean",
                            "bias_rho"},
                           "layer");
                l.kind = LayerKind::Linear;
                l.in = need(e, "in", "layer").get<std::size_t>();
                l.out = need(e, "out", "layer").get<std::size_t>();
            } else if (kind == "conv2d") {
                check_keys(e,
                           {"kind", "in_ch", "out_ch", "k", "stride", "h", "w", "act",
                            "weight_mean", "weight_rho", "bias_mean", "bias_rho"},
                           "layer");
                l.kind = LayerKind::Conv2d;
                l.in_ch = need(e, "in_ch", "layer").get<std::size_t>();
                l.out_ch = need(e, "out_ch", "layer").get<std::size_t>();
                l.k = need(e, "k", "layer").get<std::size_t>();
                l.stride = need(e, "stride", "layer").get<std::size_t>();
                l.H = need(e, "h", "layer").get<std::size_t>();
                l.W = need(e, "w", "layer").get<std::size_t>();
            } else {
                throw ArtifactError("checkpoint: unknown layer kind '" + kind + "'");
            }
            l.act_after = need(e, "act", "layer").get<bool>();
            spec.layers.push_back(l);
        }

        Model m;
        try {
            m = make_model(std::move(spec));
        } catch (const std::exception& e) {
            throw ArtifactError(std::string("checkpoint: invalid architecture: ") + e.what());
        }
        for (std::size_t li = 0; li < m.spec.layers.size(); ++li) {
            const LayerShape& l = m.spec.layers[li];
            const LayerOffsets& o = m.offsets[li];
            const json& e = jl[li];
            read_array(e, "weight_mean", "layer", m.params.data() + o.wm, l.weight_count());
            read_array(e, "weight_rho", "layer", m.params.data() + o.wrho, l.weight_count());
            read_array(e, "bias_mean", "layer", m.params.data() + o.bm, l.bias_count());
            read_array(e, "bias_rho", "layer", m.params.data() + o.brho, l.bias_count());
        }
        if (m.spec.has_heads()) {
            const json& jh = need(j, "heads", "checkpoint");
            check_keys(jh, {"a_pos_raw", "a_phot_raw"}, "heads");
            m.params[m.a_pos_off] = need(jh, "a_pos_raw", "heads").get<double>();
            m.params[m.a_phot_off] = need(jh, "a_phot_raw", "heads").get<double>();
        } else if (j.contains("heads")) {
            throw ArtifactError("checkpoint: 'heads' present but the model has none");
        }
        const std::size_t pc = need(j, "param_count", "checkpoint").get<std::size_t>();
        if (pc != m.param_count()) {
            throw ArtifactError("checkpoint: param_count disagrees with the layer shapes");
        }
        ck.model = std::move(m);
        return ck;
    } catch (const json::exception& e) {
        throw ArtifactError(std::string("checkpoint: malformed field: ") + e.what());
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    return parse_checkpoint(read_text_file(path));
}

}  // namespace utvi
