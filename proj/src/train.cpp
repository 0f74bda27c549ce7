#include "utvi/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "utvi/fmtio.hpp"
#include "utvi/rng.hpp"

namespace utvi {

PropagationMode TrainConfig::mode() const {
    switch (mode_kind) {
        case PropagationMode::Kind::SMP: return PropagationMode::smp();
        case PropagationMode::Kind::UTVI: return PropagationMode::utvi(kappa);
        case PropagationMode::Kind::MCVI: return PropagationMode::mcvi(mc_samples);
    }
    throw ParamError("TrainConfig: unknown propagation mode");
}

AdamWSettings TrainConfig::optimizer() const {
    AdamWSettings s;
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    s.weight_decay = weight_decay;
    return s;
}

void TrainConfig::validate() const {
    optimizer().validate();
    mode().validate();
    if (epochs < 1) throw ParamError("TrainConfig: epochs must be >= 1");
    if (batches_per_epoch < 1) throw ParamError("TrainConfig: batches_per_epoch must be >= 1");
    if (batch_size < 1) throw ParamError("TrainConfig: batch_size must be >= 1");
    if (!(prior_sigma > 0.0)) throw ParamError("TrainConfig: prior_sigma must be > 0");
    if (!(kl_weight >= 0.0)) throw ParamError("TrainConfig: kl_weight must be >= 0");
    if (val_size < 1) throw ParamError("TrainConfig: val_size must be >= 1");
    if (!(x_low < x_high)) throw ParamError("TrainConfig: x_low must be < x_high");
    if (deterministic_weights && mode_kind != PropagationMode::Kind::SMP) {
        throw ParamError("TrainConfig: deterministic_weights requires smp propagation");
    }
}

BatchRunner::BatchRunner(Model& m) : model_(m) {
    // Rough per-datum cost: the widest Bayesian linear layer dominates with
    // ~6 entries per (output, input) pair across its mean and variance
    // nodes; the prefix adds ~5 entries per distributional parameter pair.
    const std::size_t p = m.param_count();
    std::size_t datum_entries = 0;
    for (const LayerShape& l : m.spec.layers) {
        datum_entries += l.weight_count() * 6 + l.out_count() * 24;
    }
    tape_.reserve(p * 4 + datum_entries / 16 + 4096, p * 3 + datum_entries + 4096);
    register_params(model_, tape_);
    p0_ = tape_.mark();
}

double BatchRunner::run(const Dataset& batch, const BatchContext& ctx,
                        std::vector<double>& grads) {
    if (batch.n == 0) throw ParamError("BatchRunner: empty batch");
    ctx.mode.validate();
    const bool mc = ctx.mode.kind == PropagationMode::Kind::MCVI;
    const std::size_t k = model_.spec.output_count();

    tape_.rewind(p0_);
    sync_params(model_, tape_);
    build_tape_prefix(model_, tape_, ctx.prior_sigma, ctx.deterministic_weights, tp_);
    tape_.zero_adjoints();
    const std::size_t pe = tp_.prefix_end;

    const double wb = 1.0 / static_cast<double>(batch.n);
    double nll_sum = 0.0;
    Var om[3], ov[3];
    for (std::size_t d = 0; d < batch.n; ++d) {
        if (mc) {
            Rng rng(derive_seed(ctx.mc_root, {d}));
            forward_net<Var>(model_.spec, tp_.pv, batch.input_row(d), ctx.mode, &rng, ws_, om,
                             ov);
        } else {
            forward_net<Var>(model_.spec, tp_.pv, batch.input_row(d), ctx.mode, nullptr, ws_, om,
                             ov);
        }
        Var nll = datum_nll<Var>(om, ov, batch.target_row(d), k);
        nll_sum += nll.value();
        tape_.seed(nll, wb);
        tape_.backward_range(tape_.mark(), pe);
        tape_.rewind(pe);
    }

    const double kl_value = tape_.value(tp_.kl);
    if (ctx.kl_multiplier != 0.0) tape_.seed(tp_.kl, ctx.kl_multiplier);
    tape_.backward_range(pe, 0);

    grads.resize(model_.param_count());
    for (std::size_t i = 0; i < grads.size(); ++i) {
        grads[i] = tape_.adjoint(tape_.param_node(i));
    }
    return nll_sum * wb + ctx.kl_multiplier * kl_value;
}

double batch_elbo(const Model& m, const Dataset& batch, const BatchContext& ctx) {
    if (batch.n == 0) throw ParamError("batch_elbo: empty batch");
    ctx.mode.validate();
    EvalCache ec;
    ec.build(m);
    if (ctx.deterministic_weights) {
        for (auto& v : ec.wv) std::fill(v.begin(), v.end(), 0.0);
        for (auto& v : ec.bv) std::fill(v.begin(), v.end(), 0.0);
    }
    Workspace<double> ws;
    const std::size_t k = m.spec.output_count();
    const bool mc = ctx.mode.kind == PropagationMode::Kind::MCVI;
    double nll_sum = 0.0;
    double om[3], ov[3];
    for (std::size_t d = 0; d < batch.n; ++d) {
        if (mc) {
            Rng rng(derive_seed(ctx.mc_root, {d}));
            forward_net<double>(m.spec, ec.pv, batch.input_row(d), ctx.mode, &rng, ws, om, ov);
        } else {
            forward_net<double>(m.spec, ec.pv, batch.input_row(d), ctx.mode, nullptr, ws, om, ov);
        }
        nll_sum += datum_nll<double>(om, ov, batch.target_row(d), k);
    }
    const double kl =
        (ctx.deterministic_weights || ctx.kl_multiplier == 0.0) ? 0.0 : kl_to_prior(m, ctx.prior_sigma);
    return nll_sum / static_cast<double>(batch.n) + ctx.kl_multiplier * kl;
}

double dataset_nll(const Model& m, const Dataset& data, const PropagationMode& mode,
                   std::uint64_t mc_root) {
    if (data.n == 0) throw ParamError("dataset_nll: empty dataset");
    mode.validate();
    EvalCache ec;
    ec.build(m);
    Workspace<double> ws;
    const std::size_t k = m.spec.output_count();
    const bool mc = mode.kind == PropagationMode::Kind::MCVI;
    double acc = 0.0;
    double om[3], ov[3];
    for (std::size_t i = 0; i < data.n; ++i) {
        if (mc) {
            Rng rng(derive_seed(mc_root, {i}));
            forward_net<double>(m.spec, ec.pv, data.input_row(i), mode, &rng, ws, om, ov);
        } else {
            forward_net<double>(m.spec, ec.pv, data.input_row(i), mode, nullptr, ws, om, ov);
        }
        acc += datum_nll<double>(om, ov, data.target_row(i), k);
    }
    return acc / static_cast<double>(data.n);
}

namespace {

Dataset make_task_dataset(const ModelSpec& spec, const TrainConfig& cfg, std::size_t n, Rng& rng) {
    if (spec.task == Task::Regression) {
        return make_regression_dataset(n, rng, cfg.x_low, cfg.x_high);
    }
    return make_localization_dataset(n, rng, spec.sim);
}

void fisher_yates(std::vector<std::uint32_t>& order, Rng& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
        if (j >= i) j = i - 1;
        std::swap(order[i - 1], order[j]);
    }
}

void gather_rows(const Dataset& src, const std::vector<std::uint32_t>& order, std::size_t lo,
                 std::size_t hi, Dataset& dst) {
    dst.n = hi - lo;
    dst.input_dim = src.input_dim;
    dst.target_dim = src.target_dim;
    dst.inputs.resize(dst.n * dst.input_dim);
    dst.targets.resize(dst.n * dst.target_dim);
    for (std::size_t r = lo; r < hi; ++r) {
        const std::size_t s = order[r];
        std::copy_n(src.input_row(s), src.input_dim, dst.inputs.data() + (r - lo) * dst.input_dim);
        std::copy_n(src.target_row(s), src.target_dim,
                    dst.targets.data() + (r - lo) * dst.target_dim);
    }
}

[[noreturn]] void rethrow_with_step(const std::exception& e, std::size_t epoch,
                                    std::size_t batch) {
    std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch);
    if (const auto* ne = dynamic_cast<const NumericError*>(&e); ne && !ne->where.empty()) {
        where += ": " + ne->where;
    }
    throw NumericError(e.what(), where);
}

}  // namespace

TrainResult train(Model& m, const TrainConfig& cfg) {
    cfg.validate();
    m.spec.validate();
    if (m.params.empty()) throw ParamError("train: model has no parameters");
    const PropagationMode mode = cfg.mode();

    Rng init_rng(derive_seed(cfg.seed, {streams::init}));
    m.init_params(init_rng);

    Rng val_rng(derive_seed(cfg.val_seed, {streams::val}));
    const Dataset val = make_task_dataset(m.spec, cfg, cfg.val_size, val_rng);

    Dataset fixed;
    std::vector<std::uint32_t> order;
    std::size_t bpe = cfg.batches_per_epoch;
    if (cfg.fixed_dataset_size > 0) {
        Rng fixed_rng(derive_seed(cfg.seed, {streams::fixed}));
        fixed = make_task_dataset(m.spec, cfg, cfg.fixed_dataset_size, fixed_rng);
        bpe = (fixed.n + cfg.batch_size - 1) / cfg.batch_size;
        order.resize(fixed.n);
        std::iota(order.begin(), order.end(), 0u);
    }

    BatchRunner runner(m);
    OptimizerState opt;
    const AdamWSettings os = cfg.optimizer();
    std::vector<double> grads;
    Dataset batch;

    TrainResult res;
    res.records.reserve(cfg.epochs);
    res.best_val_nll = std::numeric_limits<double>::infinity();

    for (std::size_t l = 1; l <= cfg.epochs; ++l) {
        const auto t0 = std::chrono::steady_clock::now();
        const double scale = kl_scale(l, cfg.epochs);
        double loss_sum = 0.0;
        if (cfg.fixed_dataset_size > 0) {
            Rng shuffle_rng(derive_seed(cfg.seed, {streams::shuffle, l}));
            fisher_yates(order, shuffle_rng);
        }
        for (std::size_t b = 1; b <= bpe; ++b) {
            const Dataset* cur = &batch;
            if (cfg.fixed_dataset_size > 0) {
                const std::size_t lo = (b - 1) * cfg.batch_size;
                const std::size_t hi = std::min(fixed.n, lo + cfg.batch_size);
                gather_rows(fixed, order, lo, hi, batch);
            } else {
                Rng data_rng(derive_seed(cfg.seed, {streams::data, l, b}));
                batch = make_task_dataset(m.spec, cfg, cfg.batch_size, data_rng);
            }
            BatchContext ctx;
            ctx.mode = mode;
            ctx.kl_multiplier = cfg.kl_weight * scale / static_cast<double>(bpe);
            ctx.prior_sigma = cfg.prior_sigma;
            ctx.mc_root = derive_seed(cfg.seed, {streams::mc, l, b});
            ctx.deterministic_weights = cfg.deterministic_weights;
            double loss = 0.0;
            try {
                loss = runner.run(*cur, ctx, grads);
            } catch (const NumericError& e) {
                rethrow_with_step(e, l, b);
            } catch (const DomainError& e) {
                rethrow_with_step(e, l, b);
            }
            double gsum = 0.0;
            for (double g : grads) gsum += g;
            if (!std::isfinite(loss) || !std::isfinite(gsum)) {
                throw NumericError("non-finite training loss or gradient",
                                   "epoch " + std::to_string(l) + " batch " + std::to_string(b));
            }
            adamw_step(opt, m.params, grads, os);
            loss_sum += loss;
        }

        double vnll = 0.0;
        try {
            vnll = dataset_nll(m, val, mode, derive_seed(cfg.seed, {streams::val_eval, l}));
        } catch (const NumericError& e) {
            rethrow_with_step(e, l, 0);
        } catch (const DomainError& e) {
            rethrow_with_step(e, l, 0);
        }
        if (!std::isfinite(vnll)) {
            throw NumericError("non-finite validation NLL", "epoch " + std::to_string(l));
        }

        const auto t1 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = l;
        rec.train_loss = loss_sum / static_cast<double>(bpe);
        rec.val_nll = vnll;
        rec.kl_scale = scale;
        rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        res.records.push_back(rec);

        if (vnll < res.best_val_nll) {
            res.best_val_nll = vnll;
            res.best_epoch = l;
            res.best_params = m.params;
        }
    }
    return res;
}

std::string train_log_csv(const std::vector<EpochRecord>& records) {
    std::string out = "epoch,train_loss,val_nll,kl_scale,wall_ms\n";
    for (const EpochRecord& r : records) {
        out += std::to_string(r.epoch);
        out += ',';
        out += fmt17(r.train_loss);
        out += ',';
        out += fmt17(r.val_nll);
        out += ',';
        out += fmt17(r.kl_scale);
        out += ',';
        out += fmt17(r.wall_ms);
        out += '\n';
    }
    return out;
}

}  // namespace utvi
