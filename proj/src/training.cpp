#include "vcs/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vcs/error.hpp"
#include "vcs/retrieval.hpp"
#include "vcs/rng.hpp"

namespace vcs {

double clap_loss(const Mat& sim) {
    if (sim.rows == 0 || sim.rows != sim.cols)
        throw Error::validation("clap_loss: similarity matrix must be square and non-empty");
    for (const double v : sim.data) {
        if (!std::isfinite(v)) throw Error::runtime("clap_loss: non-finite similarity value");
    }
    const size_t n = sim.rows;
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        // Row softmax NLL at the diagonal.
        double row_max = sim(i, 0);
        for (size_t j = 1; j < n; ++j) row_max = std::max(row_max, sim(i, j));
        double row_sum = 0.0;
        for (size_t j = 0; j < n; ++j) row_sum += std::exp(sim(i, j) - row_max);
        acc += row_max + std::log(row_sum) - sim(i, i);

        // Column softmax NLL at the diagonal.
        double col_max = sim(0, i);
        for (size_t j = 1; j < n; ++j) col_max = std::max(col_max, sim(j, i));
        double col_sum = 0.0;
        for (size_t j = 0; j < n; ++j) col_sum += std::exp(sim(j, i) - col_max);
        acc += col_max + std::log(col_sum) - sim(i, i);
    }
    return acc / (2.0 * double(n));
}

FeatLosses feat_loss(const Mat& fgt, const Mat& fa, const Mat& ft) {
    if (fgt.rows != fa.rows || fgt.rows != ft.rows || fgt.cols != fa.cols || fgt.cols != ft.cols)
        throw Error::validation("feat_loss: shape mismatch");
    FeatLosses out;
    for (size_t i = 0; i < fgt.rows; ++i) {
        double sa = 0.0, st = 0.0, sc = 0.0;
        for (size_t c = 0; c < fgt.cols; ++c) {
            const double da = fgt(i, c) - fa(i, c);
            const double dt = fgt(i, c) - ft(i, c);
            const double dc = fa(i, c) - ft(i, c);
            sa += da * da;
            st += dt * dt;
            sc += dc * dc;
        }
        out.audio += std::sqrt(sa);
        out.text += std::sqrt(st);
        out.cross += std::sqrt(sc);
    }
    return out;
}

BatchLossBreakdown total_loss(double l_clap, const FeatLosses& feat, double alpha) {
    if (alpha < 0.0) throw Error::validation("total_loss: alpha must be >= 0");
    BatchLossBreakdown b;
    b.l_clap = l_clap;
    b.l_feat_audio = feat.audio;
    b.l_feat_text = feat.text;
    b.l_feat_cross = feat.cross;
    b.l_feat = feat.audio + feat.text + feat.cross;
    b.total = l_clap + alpha * b.l_feat;
    return b;
}

namespace {

struct MlpGradCtx {
    int in = 0, hidden = 0, out = 0;
    size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

MlpGradCtx mlp_ctx(const ParamLayout& lay, size_t first_tensor, int in, int hidden, int out) {
    MlpGradCtx c;
    c.in = in;
    c.hidden = hidden;
    c.out = out;
    c.w1 = lay.tensors[first_tensor].offset;
    c.b1 = lay.tensors[first_tensor + 1].offset;
    c.w2 = lay.tensors[first_tensor + 2].offset;
    c.b2 = lay.tensors[first_tensor + 3].offset;
    return c;
}

// Backward through y = W2 relu(z) + b2, z = W1 x + b1, given dL/dy.
// hidden holds relu(z); relu' is taken as 0 at z == 0. Accumulates parameter
// gradients and optionally dL/dx.
template <class In>
void mlp_backward_row(const MlpGradCtx& m, const double* p, const In* x, const double* hidden,
                      const double* gy, double* grad, double* gx) {
    for (int o = 0; o < m.out; ++o) {
        grad[m.b2 + size_t(o)] += gy[o];
        double* gw2 = grad + m.w2 + size_t(o) * m.hidden;
        for (int h = 0; h < m.hidden; ++h) gw2[h] += gy[o] * hidden[h];
    }
    for (int h = 0; h < m.hidden; ++h) {
        if (hidden[h] <= 0.0) continue;  // relu gate closed
        double gh = 0.0;
        for (int o = 0; o < m.out; ++o) gh += p[m.w2 + size_t(o) * m.hidden + h] * gy[o];
        grad[m.b1 + size_t(h)] += gh;
        double* gw1 = grad + m.w1 + size_t(h) * m.in;
        for (int i = 0; i < m.in; ++i) gw1[i] += gh * double(x[i]);
        if (gx) {
            for (int i = 0; i < m.in; ++i) gx[i] += gh * p[m.w1 + size_t(h) * m.in + i];
        }
    }
}

void check_batch(const ModelConfig& cfg, const TrainBatch& batch) {
    if (batch.n == 0) throw Error::validation("empty batch");
    if (batch.audio.size() != batch.n * size_t(cfg.audio_in_dim))
        throw Error::validation("batch audio size mismatch");
    if (batch.text.size() != batch.n * size_t(cfg.text_in_dim))
        throw Error::validation("batch text size mismatch");
    if (batch.fgt.rows != batch.n || batch.fgt.cols != size_t(cfg.feat_out_dim))
        throw Error::validation("batch fgt shape mismatch");
}

}  // namespace

BackwardResult backward_packed(const ModelConfig& cfg, const ParamLayout& layout,
                               std::span<const double> params, const TrainBatch& batch,
                               double alpha, bool tau_learnable) {
    check_batch(cfg, batch);
    const detail::BatchTrace t =
        detail::forward_trace(cfg, layout, params, batch.audio, batch.text, batch.n);
    const size_t n = batch.n;

    const FeatLosses feats = feat_loss(batch.fgt, t.fa, t.ft);
    BackwardResult result;
    result.loss = total_loss(clap_loss(t.sim), feats, alpha);
    result.grad.assign(layout.total, 0.0);
    double* grad = result.grad.data();

    const MlpGradCtx proj_a = mlp_ctx(layout, 0, cfg.audio_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    const MlpGradCtx proj_t = mlp_ctx(layout, 4, cfg.text_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    const MlpGradCtx feat_a = mlp_ctx(layout, 8, cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);
    const MlpGradCtx feat_t = mlp_ctx(layout, 12, cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);

    // dL_clap/dsim: (1/2N) (p_row - I) from rows plus (1/2N) (p_col - I) from
    // columns.
    Mat gsim(n, n);
    const double inv2n = 1.0 / (2.0 * double(n));
    for (size_t i = 0; i < n; ++i) {
        double row_max = t.sim(i, 0);
        for (size_t j = 1; j < n; ++j) row_max = std::max(row_max, t.sim(i, j));
        double row_sum = 0.0;
        for (size_t j = 0; j < n; ++j) row_sum += std::exp(t.sim(i, j) - row_max);
        for (size_t j = 0; j < n; ++j)
            gsim(i, j) += inv2n * (std::exp(t.sim(i, j) - row_max) / row_sum - (i == j ? 1.0 : 0.0));

        double col_max = t.sim(0, i);
        for (size_t j = 1; j < n; ++j) col_max = std::max(col_max, t.sim(j, i));
        double col_sum = 0.0;
        for (size_t j = 0; j < n; ++j) col_sum += std::exp(t.sim(j, i) - col_max);
        for (size_t j = 0; j < n; ++j)
            gsim(j, i) += inv2n * (std::exp(t.sim(j, i) - col_max) / col_sum - (i == j ? 1.0 : 0.0));
    }

    // sim = (ea . et) / tau with tau = exp(log_tau), so dsim/dlog_tau = -sim.
    if (tau_learnable) {
        double gt = 0.0;
        for (size_t i = 0; i < n; ++i)
            for (size_t j = 0; j < n; ++j) gt -= gsim(i, j) * t.sim(i, j);
        grad[layout.log_tau_offset] = gt;
    }

    // Embedding gradients from the contrastive term.
    Mat gea(n, size_t(cfg.embed_dim));
    Mat get(n, size_t(cfg.embed_dim));
    const double inv_tau = 1.0 / t.tau;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            const double gij = gsim(i, j) * inv_tau;
            if (gij == 0.0) continue;
            for (int c = 0; c < cfg.embed_dim; ++c) {
                gea(i, size_t(c)) += gij * t.et(j, size_t(c));
                get(j, size_t(c)) += gij * t.ea(i, size_t(c));
            }
        }
    }

    // Feature-loss gradients; the subgradient of |r| at r = 0 is 0.
    std::vector<double> gfa(size_t(cfg.feat_out_dim));
    std::vector<double> gft(size_t(cfg.feat_out_dim));
    for (size_t i = 0; i < n; ++i) {
        std::fill(gfa.begin(), gfa.end(), 0.0);
        std::fill(gft.begin(), gft.end(), 0.0);
        if (alpha > 0.0) {
            double sa = 0.0, st = 0.0, sc = 0.0;
            for (size_t c = 0; c < size_t(cfg.feat_out_dim); ++c) {
                const double da = t.fa(i, c) - batch.fgt(i, c);
                const double dt = t.ft(i, c) - batch.fgt(i, c);
                const double dc = t.fa(i, c) - t.ft(i, c);
                sa += da * da;
                st += dt * dt;
                sc += dc * dc;
            }
            sa = std::sqrt(sa);
            st = std::sqrt(st);
            sc = std::sqrt(sc);
            for (size_t c = 0; c < size_t(cfg.feat_out_dim); ++c) {
                if (sa > 0.0) gfa[c] += alpha * (t.fa(i, c) - batch.fgt(i, c)) / sa;
                if (st > 0.0) gft[c] += alpha * (t.ft(i, c) - batch.fgt(i, c)) / st;
                if (sc > 0.0) {
                    const double g = alpha * (t.fa(i, c) - t.ft(i, c)) / sc;
                    gfa[c] += g;
                    gft[c] -= g;
                }
            }
        }
        mlp_backward_row(feat_a, params.data(), t.ea.row(i).data(), t.ga.row(i).data(), gfa.data(),
                         grad, gea.row(i).data());
        mlp_backward_row(feat_t, params.data(), t.et.row(i).data(), t.gt.row(i).data(), gft.data(),
                         grad, get.row(i).data());
    }

    // Through the L2 normalization: gv = (g - (g.e) e) / |v|, then the
    // projection MLPs. Input gradients are not needed (encoders are frozen).
    std::vector<double> gv(size_t(cfg.embed_dim));
    for (size_t i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int c = 0; c < cfg.embed_dim; ++c) dot += gea(i, size_t(c)) * t.ea(i, size_t(c));
        for (int c = 0; c < cfg.embed_dim; ++c)
            gv[size_t(c)] = (gea(i, size_t(c)) - dot * t.ea(i, size_t(c))) / t.na[i];
        mlp_backward_row(proj_a, params.data(), batch.audio.data() + i * size_t(cfg.audio_in_dim),
                         t.ha.row(i).data(), gv.data(), grad, nullptr);

        dot = 0.0;
        for (int c = 0; c < cfg.embed_dim; ++c) dot += get(i, size_t(c)) * t.et(i, size_t(c));
        for (int c = 0; c < cfg.embed_dim; ++c)
            gv[size_t(c)] = (get(i, size_t(c)) - dot * t.et(i, size_t(c))) / t.nt[i];
        mlp_backward_row(proj_t, params.data(), batch.text.data() + i * size_t(cfg.text_in_dim),
                         t.ht.row(i).data(), gv.data(), grad, nullptr);
    }

    for (const auto& spec : layout.tensors) {
        for (size_t k = 0; k < spec.size; ++k) {
            if (!std::isfinite(result.grad[spec.offset + k]))
                throw Error::runtime("non-finite gradient in tensor " + spec.name);
        }
    }
    return result;
}

double loss_packed(const ModelConfig& cfg, const ParamLayout& layout,
                   std::span<const double> params, const TrainBatch& batch, double alpha) {
    check_batch(cfg, batch);
    const detail::BatchTrace t =
        detail::forward_trace(cfg, layout, params, batch.audio, batch.text, batch.n);
    return total_loss(clap_loss(t.sim), feat_loss(batch.fgt, t.fa, t.ft), alpha).total;
}

BackwardResult backward(const RetrievalModel& model, const TrainBatch& batch, double alpha) {
    const ParamLayout layout = make_layout(model.config);
    const std::vector<double> params = pack_params(model);
    return backward_packed(model.config, layout, params, batch, alpha,
                           model.config.tau_learnable);
}

GradCheckReport grad_check(const RetrievalModel& model, const TrainBatch& batch, double alpha,
                           double h, double tolerance) {
    if (!(h > 0.0)) throw Error::validation("grad_check: h must be > 0");
    const ParamLayout layout = make_layout(model.config);
    std::vector<double> params = pack_params(model);
    const BackwardResult analytic =
        backward_packed(model.config, layout, params, batch, alpha, model.config.tau_learnable);

    GradCheckReport report;
    report.tolerance = tolerance;
    for (const auto& spec : layout.tensors) {
        GradCheckTensor entry;
        entry.tensor = spec.name;
        for (size_t k = 0; k < spec.size; ++k) {
            const size_t idx = spec.offset + k;
            const double saved = params[idx];
            params[idx] = saved + h;
            const double up = loss_packed(model.config, layout, params, batch, alpha);
            params[idx] = saved - h;
            const double down = loss_packed(model.config, layout, params, batch, alpha);
            params[idx] = saved;

            double fd = (up - down) / (2.0 * h);
            if (spec.name == "log_tau" && !model.config.tau_learnable) fd = 0.0;
            const double a = analytic.grad[idx];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            entry.max_rel_err = std::max(entry.max_rel_err, rel);
            entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
            entry.max_abs_fd = std::max(entry.max_abs_fd, std::abs(fd));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.tensors.push_back(std::move(entry));
    }
    report.passed = report.max_rel_err < tolerance;
    return report;
}

namespace {

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int64_t t = 0;
};

void adam_step(AdamState& state, std::vector<double>& params, const std::vector<double>& grad,
               const TrainConfig& cfg) {
    ++state.t;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, double(state.t));
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.adam_beta1 * state.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
        state.v[i] = cfg.adam_beta2 * state.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

TrainBatch gather_batch(const ModelConfig& cfg, const TrainingSet& set,
                        const std::vector<size_t>& order, size_t begin, size_t count,
                        const std::vector<std::array<double, 3>>& fgt_norm) {
    TrainBatch batch;
    batch.n = count;
    batch.audio.resize(count * size_t(cfg.audio_in_dim));
    batch.text.resize(count * size_t(cfg.text_in_dim));
    batch.fgt = Mat(count, 3);
    for (size_t r = 0; r < count; ++r) {
        const size_t src = order[begin + r];
        std::copy_n(set.audio.data() + src * size_t(cfg.audio_in_dim), size_t(cfg.audio_in_dim),
                    batch.audio.data() + r * size_t(cfg.audio_in_dim));
        std::copy_n(set.text.data() + src * size_t(cfg.text_in_dim), size_t(cfg.text_in_dim),
                    batch.text.data() + r * size_t(cfg.text_in_dim));
        for (size_t c = 0; c < 3; ++c) batch.fgt(r, c) = fgt_norm[src][c];
    }
    return batch;
}

// Validation gender identification in the top-10 retrievals; absent unless
// both binary classes appear among the queries.
std::optional<double> validation_gender_metric(const RetrievalModel& model,
                                               const TrainingSet& valid) {
    if (valid.size() == 0) return std::nullopt;
    std::vector<SegmentRecord> records(valid.size());
    VectorStore audio(uint32_t(model.config.audio_in_dim), valid.size());
    std::vector<GenderQuery> queries;
    bool has_male = false, has_female = false;
    for (size_t i = 0; i < valid.size(); ++i) {
        if (!valid.gender[i] || (*valid.gender[i] != GenderLabel::male &&
                                 *valid.gender[i] != GenderLabel::female))
            return std::nullopt;  // metric needs a fully binary-labeled set
        records[i].id = valid.ids[i];
        records[i].channel_id = "v";
        records[i].duration_s = 1.0;
        records[i].gender_label = valid.gender[i];
        records[i].audio_vec_ref = VecRef{"audio", uint32_t(i)};
        std::copy_n(valid.audio.data() + i * size_t(model.config.audio_in_dim),
                    size_t(model.config.audio_in_dim), audio.row(i).begin());
        GenderQuery q;
        q.gender = *valid.gender[i];
        q.description_vec.assign(valid.text.data() + i * size_t(model.config.text_in_dim),
                                 valid.text.data() + (i + 1) * size_t(model.config.text_in_dim));
        has_male = has_male || q.gender == GenderLabel::male;
        has_female = has_female || q.gender == GenderLabel::female;
        queries.push_back(std::move(q));
    }
    if (!has_male || !has_female) return std::nullopt;
    const EmbeddingIndex index = build_index(model, records, audio);
    return gender_accuracy_at_k(index, model, queries, 10);
}

}  // namespace

TrainResult train(RetrievalModel model, const TrainingSet& train_set,
                  const TrainingSet& valid_set, const TrainConfig& cfg,
                  const std::filesystem::path* checkpoint_dir) {
    if (!(cfg.learning_rate > 0.0)) throw Error::validation("learning_rate must be > 0");
    if (cfg.batch_size < 2)
        throw Error::validation("batch_size must be >= 2 for the contrastive loss");
    if (cfg.epochs < 1) throw Error::validation("epochs must be >= 1");
    if (cfg.checkpoint_every < 1) throw Error::validation("checkpoint_every must be >= 1");
    if (cfg.alpha < 0.0) throw Error::validation("alpha must be >= 0");
    if (train_set.size() == 0) throw Error::validation("empty training set");
    if (train_set.size() < size_t(cfg.batch_size))
        throw Error::validation("training set (" + std::to_string(train_set.size()) +
                                " pairs) is smaller than batch_size (" +
                                std::to_string(cfg.batch_size) + ")");

    if (!model.normalizer) model.normalizer = fit_normalizer(train_set.features);
    std::vector<std::array<double, 3>> fgt_norm(train_set.size());
    for (size_t i = 0; i < train_set.size(); ++i)
        fgt_norm[i] = normalize(*model.normalizer, train_set.features[i]);

    const ParamLayout layout = make_layout(model.config);
    std::vector<double> params = pack_params(model);
    AdamState adam;
    adam.m.assign(layout.total, 0.0);
    adam.v.assign(layout.total, 0.0);
    const double log_tau_min = std::log(kTauMin);
    const double log_tau_max = std::log(kTauMax);

    Rng rng(cfg.seed);
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    TrainResult result;
    double best_acc = -1.0;
    std::vector<double> best_params;
    const size_t batches_per_epoch = train_set.size() / size_t(cfg.batch_size);

    auto sync_model = [&]() { unpack_params(params, model); };

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        BatchLossBreakdown sum;
        for (size_t b = 0; b < batches_per_epoch; ++b) {
            const TrainBatch batch = gather_batch(model.config, train_set, order,
                                                  b * size_t(cfg.batch_size),
                                                  size_t(cfg.batch_size), fgt_norm);
            BackwardResult back = backward_packed(model.config, layout, params, batch, cfg.alpha,
                                                  model.config.tau_learnable);
            if (!std::isfinite(back.loss.total))
                throw Error::runtime("non-finite loss at epoch " + std::to_string(epoch) +
                                     ", step " + std::to_string(b + 1));
            adam_step(adam, params, back.grad, cfg);
            params[layout.log_tau_offset] =
                std::clamp(params[layout.log_tau_offset], log_tau_min, log_tau_max);

            sum.l_clap += back.loss.l_clap;
            sum.l_feat_audio += back.loss.l_feat_audio;
            sum.l_feat_text += back.loss.l_feat_text;
            sum.l_feat_cross += back.loss.l_feat_cross;
            sum.l_feat += back.loss.l_feat;
            sum.total += back.loss.total;
        }

        EpochLog log;
        log.epoch = epoch;
        if (batches_per_epoch > 0) {
            const double inv = 1.0 / double(batches_per_epoch);
            log.mean_loss = {sum.l_clap * inv,      sum.l_feat_audio * inv, sum.l_feat_text * inv,
                             sum.l_feat_cross * inv, sum.l_feat * inv,      sum.total * inv};
        }
        sync_model();
        log.valid_gender_acc_at_10 = validation_gender_metric(model, valid_set);
        if (log.valid_gender_acc_at_10 && *log.valid_gender_acc_at_10 > best_acc) {
            best_acc = *log.valid_gender_acc_at_10;
            result.best_epoch = epoch;
            best_params = params;
        }
        result.log.push_back(log);

        if (checkpoint_dir && epoch % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.cnmdl", epoch);
            save_checkpoint(model, *checkpoint_dir / name);
        }
    }

    sync_model();
    if (checkpoint_dir) {
        save_checkpoint(model, *checkpoint_dir / "checkpoint_final.cnmdl");
        if (!best_params.empty()) {
            RetrievalModel best = model;
            unpack_params(best_params, best);
            save_checkpoint(best, *checkpoint_dir / "checkpoint_best.cnmdl");
        }
    }
    if (best_acc < 0.0) result.best_epoch = cfg.epochs;
    result.model = std::move(model);
    return result;
}

}  // namespace vcs
