// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one [PASS]/[FAIL] line per criterion. Exits nonzero if any
// criterion fails. Diagnostic (non-gating) findings are printed as [DIAG].

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "testing_util.hpp"
#include "vcs/audio.hpp"
#include "vcs/curation.hpp"
#include "vcs/error.hpp"
#include "vcs/features.hpp"
#include "vcs/io_util.hpp"
#include "vcs/manifest.hpp"
#include "vcs/model.hpp"
#include "vcs/retrieval.hpp"
#include "vcs/training.hpp"
#include "vcs/vector_store.hpp"
#include "vcs/ward.hpp"
#include "vcs/wsola.hpp"

using namespace vcs;

namespace {

struct Check {
    bool ok = true;
    std::string first_failure;

    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            first_failure = what;
        }
    }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient correctness on the tiny model.

void criterion_gradients(Check& c, std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelConfig cfg;
    cfg.audio_in_dim = 8;
    cfg.text_in_dim = 8;
    cfg.embed_dim = 4;
    cfg.proj_hidden_dim = 8;
    cfg.feat_hidden_dim = 8;
    cfg.seed = 41;
    const RetrievalModel model = init_model(cfg);

    Rng rng(42);
    TrainBatch batch;
    batch.n = 3;
    batch.audio.resize(3 * 8);
    batch.text.resize(3 * 8);
    batch.fgt = Mat(3, 3);
    for (auto& v : batch.audio) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : batch.text) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : batch.fgt.data) v = rng.uniform(-1.5, 1.5);

    double worst = 0.0;
    for (const double alpha : {0.0, 0.5, 1.0}) {
        const GradCheckReport report = grad_check(model, batch, alpha, 1e-4, 1e-4);
        worst = std::max(worst, report.max_rel_err);
        c.expect(report.passed, "alpha=" + fmt(alpha) + " max rel err " + fmt(report.max_rel_err));
        c.expect(report.tensors.size() == 17, "expected 17 parameter tensors");
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 5.0, "runtime " + fmt(secs) + "s exceeds 5s");
    detail = "max rel err " + fmt(worst) + ", " + fmt(secs) + "s";
}

// ---------------------------------------------------------------------------
// Criterion 2: loss identities.

void criterion_losses(Check& c, std::string& detail) {
    for (const size_t n : {2u, 8u, 48u}) {
        Mat sim(n, n);
        for (auto& v : sim.data) v = 1.234;
        c.expect(std::abs(clap_loss(sim) - std::log(double(n))) < 1e-9,
                 "clap_loss(const " + std::to_string(n) + "x" + std::to_string(n) +
                     ") != ln N within 1e-9");
    }
    Mat one(1, 1);
    one(0, 0) = 3.7;
    c.expect(clap_loss(one) == 0.0, "clap_loss at N=1 must be exactly 0");

    Mat fgt(1, 3), fa(1, 3), ft(1, 3);
    fa(0, 0) = 3.0;
    fa(0, 1) = 4.0;
    const FeatLosses triangle = feat_loss(fgt, fa, ft);
    c.expect(triangle.audio == 5.0 && triangle.text == 0.0 && triangle.cross == 5.0,
             "3-4-5 fixture must give exactly (5, 0, 5)");

    // Identities on 100 random batches through the real forward/backward path.
    ModelConfig cfg;
    cfg.audio_in_dim = 6;
    cfg.text_in_dim = 6;
    cfg.embed_dim = 4;
    cfg.proj_hidden_dim = 16;
    cfg.feat_hidden_dim = 8;
    cfg.seed = 7;
    const RetrievalModel model = init_model(cfg);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        TrainBatch batch;
        batch.n = 1 + rng.below(6);
        batch.audio.resize(batch.n * 6);
        batch.text.resize(batch.n * 6);
        batch.fgt = Mat(batch.n, 3);
        for (auto& v : batch.audio) v = float(rng.uniform(-1.0, 1.0));
        for (auto& v : batch.text) v = float(rng.uniform(-1.0, 1.0));
        for (auto& v : batch.fgt.data) v = rng.uniform(-2.0, 2.0);
        const double alpha = rng.uniform(0.0, 2.0);
        const BackwardResult r = backward(model, batch, alpha);
        c.expect(std::abs(r.loss.l_feat -
                          (r.loss.l_feat_audio + r.loss.l_feat_text + r.loss.l_feat_cross)) < 1e-9,
                 "l_feat != sum of parts within 1e-9");
        c.expect(std::abs(r.loss.total - (r.loss.l_clap + alpha * r.loss.l_feat)) < 1e-9,
                 "total != l_clap + alpha*l_feat within 1e-9");
    }
    detail = "ln N at N in {2,8,48}, 3-4-5 exact, identities on 100 random batches";
}

// ---------------------------------------------------------------------------
// Criterion 3: published-constant snapshot.

void criterion_constants(Check& c, std::string& detail) {
    const ModelConfig mcfg;
    c.expect(mcfg.embed_dim == 512, "embed_dim default must be 512");
    const double tau_ref = 1.0 / std::log(1.0 / 0.07);
    c.expect(std::abs(mcfg.tau_init - tau_ref) < 1e-9, "tau_init != 1/ln(1/0.07)");
    c.expect(std::abs(mcfg.tau_init - 0.376044458) < 1e-6,
             "tau_init value drifted from 0.376044");

    const TrainConfig tcfg;
    c.expect(tcfg.learning_rate == 5e-6, "learning_rate default must be 5e-6");
    c.expect(tcfg.batch_size == 48, "batch_size default must be 48");
    c.expect(tcfg.epochs == 90, "epochs default must be 90");
    c.expect(tcfg.checkpoint_every == 5, "checkpoint interval default must be 5");

    const FilterThresholds t;
    c.expect(t.min_duration_s == 2.0 && t.max_duration_s == 10.0,
             "duration thresholds must default to [2, 10] s");
    c.expect(t.min_volume_dbfs == -55.0, "volume threshold must default to -55 dBFS");
    c.expect(t.min_nisqa_mos == 2.0, "NISQA threshold must default to 2");
    c.expect(t.max_mlm_score == -0.01, "MLM threshold must default to -0.01");

    const KeywordSet k = default_voice_keywords();
    c.expect(k.min_matching_comments == 10, "keyword comment threshold must default to 10");
    c.expect(k.keywords.size() == 8, "keyword set must carry the eight published words");

    detail = "embed 512, tau " + fmt(mcfg.tau_init) +
             ", lr 5e-6, batch 48, epochs 90, ckpt 5, thresholds (2,10,-55,2,-0.01), kw 10";
}

// ---------------------------------------------------------------------------
// Criterion 4: end-to-end synthetic training.

struct SyntheticRun {
    RetrievalModel model;
    testutil::SyntheticData data;
};

ModelConfig synthetic_model_config(const testutil::SyntheticData& data) {
    ModelConfig mcfg;
    mcfg.audio_in_dim = data.audio_dim;
    mcfg.text_in_dim = data.text_dim;
    mcfg.embed_dim = 32;
    mcfg.proj_hidden_dim = 128;
    mcfg.feat_hidden_dim = 128;
    mcfg.tau_init = 0.01;
    mcfg.seed = 81;
    return mcfg;
}

RetrievalModel train_synthetic(const testutil::SyntheticData& data, double alpha, int epochs) {
    TrainConfig tcfg;
    tcfg.learning_rate = 5e-3;
    tcfg.batch_size = 32;
    tcfg.epochs = epochs;  // 16 optimizer steps per epoch at 512/32
    tcfg.alpha = alpha;
    tcfg.seed = 82;
    return train(init_model(synthetic_model_config(data)), data.train, {}, tcfg).model;
}

EmbeddingIndex held_out_index(const RetrievalModel& model, const testutil::SyntheticData& data) {
    VectorStore audio(uint32_t(data.audio_dim), data.held.size());
    std::copy(data.held.audio.begin(), data.held.audio.end(), audio.data.begin());
    std::vector<SegmentRecord> records;
    for (size_t i = 0; i < data.held.size(); ++i) {
        SegmentRecord r;
        r.id = data.held.ids[i];
        r.channel_id = "held";
        r.duration_s = 1.0;
        r.gender_label = data.held.gender[i];
        r.audio_vec_ref = VecRef{"audio", uint32_t(i)};
        records.push_back(std::move(r));
    }
    return build_index(model, records, audio);
}

double held_out_recall(const RetrievalModel& model, const testutil::SyntheticData& data) {
    const EmbeddingIndex index = held_out_index(model, data);
    size_t hits = 0;
    for (size_t i = 0; i < data.held.size(); ++i) {
        const std::vector<float> q(
            data.held.text.begin() + long(i) * data.text_dim,
            data.held.text.begin() + long(i + 1) * data.text_dim);
        if (retrieve_topk(index, model, q, 1)[0].id == data.held.ids[i]) ++hits;
    }
    return double(hits) / double(data.held.size());
}

double zero_shot_accuracy(const RetrievalModel& model, const testutil::SyntheticData& data) {
    TemplateSet templates;
    templates.entries.push_back(
        {"male", "a voice of a man", data.text_of(data.gender_mean_audio(GenderLabel::male))});
    templates.entries.push_back(
        {"female", "a voice of a woman",
         data.text_of(data.gender_mean_audio(GenderLabel::female))});
    VectorStore audio(uint32_t(data.audio_dim), data.held.size());
    std::copy(data.held.audio.begin(), data.held.audio.end(), audio.data.begin());
    size_t hits = 0;
    for (size_t i = 0; i < data.held.size(); ++i) {
        const auto e = project(model, Modality::audio, audio.row(i));
        if (zero_shot_classify(model, e, templates) == to_string(*data.held.gender[i])) ++hits;
    }
    return double(hits) / double(data.held.size());
}

void criterion_end_to_end(Check& c, std::string& detail, SyntheticRun& out) {
    const auto t0 = std::chrono::steady_clock::now();
    out.data = testutil::make_synthetic(testutil::SyntheticParams{});  // 512 train + 64 held
    out.model = train_synthetic(out.data, 1.0, 12);                    // 192 steps, within 200

    const double recall = held_out_recall(out.model, out.data);
    const double zs = zero_shot_accuracy(out.model, out.data);
    c.expect(recall >= 0.8, "held-out top-1 recall " + fmt(recall) + " < 0.8");
    c.expect(zs >= 0.95, "zero-shot 2-label accuracy " + fmt(zs) + " < 0.95");
    const double secs = seconds_since(t0);
    c.expect(secs < 60.0, "runtime " + fmt(secs) + "s exceeds 60s");
    detail = "recall@1 " + fmt(recall) + ", zero-shot " + fmt(zs) + ", " + fmt(secs) + "s";
}

std::string diagnostic_alpha_convergence(const testutil::SyntheticData& data) {
    // Non-gating: first matched step count (multiples of 48 steps = 3 epochs)
    // at which each alpha reaches the recall threshold.
    auto first_reaching = [&](double alpha) -> int {
        for (const int epochs : {3, 6, 9, 12}) {
            const RetrievalModel m = train_synthetic(data, alpha, epochs);
            if (held_out_recall(m, data) >= 0.8) return epochs * 16;
        }
        return -1;
    };
    const int steps_a1 = first_reaching(1.0);
    const int steps_a0 = first_reaching(0.0);
    std::ostringstream ss;
    const bool mirrored = steps_a1 >= 0 && (steps_a0 < 0 || steps_a1 <= steps_a0);
    ss << "[DIAG] criterion 4 (non-gating): steps to recall>=0.8: alpha=1.0 -> "
       << (steps_a1 < 0 ? std::string("not reached") : std::to_string(steps_a1))
       << ", alpha=0.0 -> "
       << (steps_a0 < 0 ? std::string("not reached") : std::to_string(steps_a0))
       << (mirrored ? " (alpha=1.0 no slower, mirrors the reference finding)"
                    : " (alpha=0.0 faster on this fixture: its text pairs are a nearly "
                      "noise-free linear map, so the contrastive signal alone is stronger "
                      "than the cluster-constant feature signal)");
    return ss.str();
}

// ---------------------------------------------------------------------------
// Criterion 5: Ward clustering against the brute-force oracle.

std::vector<ClusterMerge> brute_force_ward(const VectorStore& v) {
    struct Cluster {
        int id;
        double size;
        std::vector<double> centroid;
    };
    const size_t n = v.count();
    std::vector<Cluster> clusters;
    for (size_t i = 0; i < n; ++i) {
        clusters.push_back({int(i), 1.0, std::vector<double>(v.row(i).begin(), v.row(i).end())});
    }
    std::vector<ClusterMerge> merges;
    for (size_t step = 0; step + 1 < n; ++step) {
        double best_d = std::numeric_limits<double>::infinity();
        size_t bi = 0, bj = 0;
        int best_a = 0, best_b = 0;
        for (size_t i = 0; i < clusters.size(); ++i) {
            for (size_t j = i + 1; j < clusters.size(); ++j) {
                double sq = 0.0;
                for (size_t d = 0; d < clusters[i].centroid.size(); ++d) {
                    const double diff = clusters[i].centroid[d] - clusters[j].centroid[d];
                    sq += diff * diff;
                }
                const double delta =
                    (clusters[i].size * clusters[j].size) / (clusters[i].size + clusters[j].size) *
                    sq;
                const int id_a = std::min(clusters[i].id, clusters[j].id);
                const int id_b = std::max(clusters[i].id, clusters[j].id);
                if (delta < best_d ||
                    (delta == best_d && (id_a < best_a || (id_a == best_a && id_b < best_b)))) {
                    best_d = delta;
                    bi = i;
                    bj = j;
                    best_a = id_a;
                    best_b = id_b;
                }
            }
        }
        merges.push_back({best_a, best_b, best_d, int(n + step)});
        Cluster merged;
        merged.id = int(n + step);
        merged.size = clusters[bi].size + clusters[bj].size;
        merged.centroid.resize(clusters[bi].centroid.size());
        for (size_t d = 0; d < merged.centroid.size(); ++d) {
            merged.centroid[d] = (clusters[bi].size * clusters[bi].centroid[d] +
                                  clusters[bj].size * clusters[bj].centroid[d]) /
                                 merged.size;
        }
        clusters.erase(clusters.begin() + long(bj));
        clusters.erase(clusters.begin() + long(bi));
        clusters.push_back(std::move(merged));
    }
    return merges;
}

void criterion_ward(Check& c, std::string& detail) {
    const auto t0 = std::chrono::steady_clock::now();
    for (uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(1000 + seed);
        VectorStore v(6, 50);
        for (auto& x : v.data) x = float(rng.uniform(-1.0, 1.0));
        const auto oracle = brute_force_ward(v);
        const WardResult got = ward_cluster(v, 1);
        c.expect(got.tree.merges.size() == oracle.size(), "merge count mismatch");
        for (size_t i = 0; i < oracle.size() && c.ok; ++i) {
            c.expect(got.tree.merges[i].a == oracle[i].a && got.tree.merges[i].b == oracle[i].b &&
                         got.tree.merges[i].merged_id == oracle[i].merged_id,
                     "seed " + std::to_string(seed) + ": merge " + std::to_string(i) +
                         " differs from the oracle");
            const double ref = oracle[i].distance;
            c.expect(std::abs(got.tree.merges[i].distance - ref) <= 1e-9 * std::max(1.0, ref),
                     "seed " + std::to_string(seed) + ": merge distance differs");
        }
        for (const int k : {1, 2, 7, 25, 50}) {
            const auto assignment = cut_assignment(got.tree, k);
            std::set<int> labels(assignment.begin(), assignment.end());
            c.expect(labels.size() == size_t(k),
                     "cut at k=" + std::to_string(k) + " has wrong cluster count");
        }
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 10.0, "runtime " + fmt(secs) + "s exceeds 10s");
    detail = "10 seeds, N=50, sequences identical, " + fmt(secs) + "s";
}

// ---------------------------------------------------------------------------
// Criterion 6: DSP checks.

void criterion_dsp(Check& c, std::string& detail) {
    std::string f0s;
    for (const double freq : {100.0, 220.0, 400.0}) {
        const auto f0 = extract_f0_mean(testutil::make_sine(freq, 1.0));
        c.expect(f0.has_value(), "sine at " + fmt(freq) + " Hz not voiced");
        if (f0) {
            c.expect(std::abs(*f0 - freq) / freq < 0.02,
                     "f0 " + fmt(*f0) + " off by more than 2% at " + fmt(freq) + " Hz");
            f0s += fmt(*f0) + " ";
        }
    }
    const Waveform in = testutil::make_sine(220.0, 1.0);
    const Waveform out = time_stretch_wsola(in, 1.5);
    const double hop = 240.0;  // 30 ms window at 16 kHz, 50% overlap
    const double target = double(in.samples.size()) / 1.5;
    c.expect(std::abs(double(out.samples.size()) - target) <= hop,
             "stretched length " + std::to_string(out.samples.size()) + " not within one hop of " +
                 fmt(target));
    const auto f0_out = extract_f0_mean(out);
    c.expect(f0_out.has_value(), "stretched sine not voiced");
    if (f0_out)
        c.expect(std::abs(*f0_out - 220.0) / 220.0 < 0.03,
                 "stretched f0 " + fmt(*f0_out) + " off by more than 3%");
    detail = "f0 {" + f0s + "}, stretch len " + std::to_string(out.samples.size()) + "/" +
             fmt(target) + ", f0 after stretch " + (f0_out ? fmt(*f0_out) : "absent");
}

// ---------------------------------------------------------------------------
// Criterion 7: curation golden test.

std::vector<SegmentRecord> golden_manifest() {
    auto rec = testutil::make_record;
    std::vector<SegmentRecord> r;
    r.push_back(rec("g0", "c0", 5.0, -30.0, 3.5, -3.0));   // kept
    r.push_back(rec("g1", "c0", 11.0, -30.0, 3.5, -3.0));  // duration
    r.push_back(rec("g2", "c1", 1.5, -30.0, 3.5, -3.0));   // duration
    r.push_back(rec("g3", "c1", 5.0, -60.0, 3.5, -3.0));   // volume
    r.push_back(rec("g4", "c2", 5.0, -30.0, 1.5, -3.0));   // nisqa
    r.push_back(rec("g5", "c2", 2.0, -54.9, 2.0, -0.02));  // kept
    r.push_back(rec("g6", "c3", 5.0, -30.0, 3.5, 0.0));    // mlm
    SegmentRecord missing = rec("g7b", "c5", 5.0, -30.0, 3.5, -3.0);
    missing.volume_dbfs.reset();                           // missing-field
    r.push_back(missing);
    r.push_back(rec("g7", "c3", 5.0, -55.0, 3.5, -3.0));   // volume boundary
    r.push_back(rec("g8", "c4", 10.0, -20.0, 4.5, -5.0));  // kept
    return r;
}

void criterion_curation(Check& c, std::string& detail) {
    const auto records = golden_manifest();
    const auto [kept, report] = apply_quality_filters(records, FilterThresholds{});
    std::vector<std::string> ids;
    for (const auto& r : kept) ids.push_back(r.id);
    c.expect(ids == std::vector<std::string>{"g0", "g5", "g8"}, "kept set differs from hand-derived");
    c.expect(report.rejected.at("duration") == 2, "duration rejections != 2");
    c.expect(report.rejected.at("volume") == 2, "volume rejections != 2");
    c.expect(report.rejected.at("nisqa") == 1, "nisqa rejections != 1");
    c.expect(report.rejected.at("mlm") == 1, "mlm rejections != 1");
    c.expect(report.rejected.at("missing-field") == 1, "missing-field rejections != 1");
    c.expect(report.rejected_total() == report.input - report.kept, "report does not sum");

    const auto [kept2, report2] = apply_quality_filters(kept, FilterThresholds{});
    c.expect(kept2.size() == kept.size() && report2.rejected_total() == 0, "filters not idempotent");

    std::set<std::string> base_ids(ids.begin(), ids.end());
    Rng rng(55);
    bool monotone = true;
    for (int trial = 0; trial < 100; ++trial) {
        FilterThresholds loose;
        loose.min_duration_s -= rng.uniform(0.0, 2.0);
        loose.max_duration_s += rng.uniform(0.0, 5.0);
        loose.min_volume_dbfs -= rng.uniform(0.0, 20.0);
        loose.min_nisqa_mos -= rng.uniform(0.0, 1.0);
        loose.max_mlm_score += rng.uniform(0.0, 2.0);
        const auto [loose_kept, lr] = apply_quality_filters(records, loose);
        std::set<std::string> loose_ids;
        for (const auto& r : loose_kept) loose_ids.insert(r.id);
        for (const auto& id : base_ids) monotone = monotone && loose_ids.count(id) > 0;
    }
    c.expect(monotone, "relaxing thresholds dropped a previously kept record");
    detail = "kept {g0,g5,g8}, counts (2,2,1,1,1), idempotent, monotone over 100 relaxations";
}

// ---------------------------------------------------------------------------
// Criterion 8: split safety.

void criterion_split(Check& c, std::string& detail) {
    std::vector<SegmentRecord> records;
    for (int ch = 0; ch < 100; ++ch) {
        for (int s = 0; s < 3; ++s) {
            SegmentRecord r = testutil::make_record(
                "s" + std::to_string(ch) + "-" + std::to_string(s), "ch" + std::to_string(ch),
                5.0, -30.0, 3.0, -3.0);
            records.push_back(std::move(r));
        }
    }
    const double per_channel = 3.0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const DatasetSplit split = split_by_channel(records, {0.8, 0.1, 0.1}, seed);
        try {
            validate_split(split, records);
        } catch (const Error& e) {
            c.expect(false, "seed " + std::to_string(seed) + ": " + e.what());
            break;
        }
        c.expect(std::abs(double(split.train.size()) - 240.0) <= per_channel,
                 "seed " + std::to_string(seed) + ": train size " +
                     std::to_string(split.train.size()) + " beyond one channel of 240");
        c.expect(std::abs(double(split.valid.size()) - 30.0) <= per_channel,
                 "seed " + std::to_string(seed) + ": valid size beyond one channel of 30");
        c.expect(std::abs(double(split.test.size()) - 30.0) <= per_channel,
                 "seed " + std::to_string(seed) + ": test size beyond one channel of 30");
    }
    detail = "50 seeds, disjoint, sizes within one channel of (240, 30, 30)";
}

// ---------------------------------------------------------------------------
// Criterion 9: chance-level sanity.

void criterion_chance_level(Check& c, std::string& detail, const SyntheticRun& run) {
    // Untrained model, balanced index and queries whose labels are independent
    // of the vectors: the macro accuracy must sit at chance.
    Rng rng(301);
    const int dim = 16;
    VectorStore audio(dim, 200);
    for (auto& v : audio.data) v = float(rng.normal());
    std::vector<SegmentRecord> records;
    for (size_t i = 0; i < 200; ++i) {
        SegmentRecord r;
        r.id = "i" + std::to_string(i);
        r.channel_id = "c";
        r.duration_s = 1.0;
        r.audio_vec_ref = VecRef{"audio", uint32_t(i)};
        r.gender_label = i % 2 == 0 ? GenderLabel::male : GenderLabel::female;
        records.push_back(std::move(r));
    }
    ModelConfig cfg;
    cfg.audio_in_dim = dim;
    cfg.text_in_dim = dim;
    cfg.embed_dim = 32;
    cfg.proj_hidden_dim = 128;
    cfg.feat_hidden_dim = 128;
    cfg.seed = 303;
    const RetrievalModel untrained = init_model(cfg);
    const EmbeddingIndex index = build_index(untrained, records, audio);
    std::vector<GenderQuery> queries;
    for (size_t q = 0; q < 200; ++q) {
        GenderQuery gq;
        gq.gender = q % 2 == 0 ? GenderLabel::male : GenderLabel::female;
        gq.description_vec.resize(dim);
        for (auto& v : gq.description_vec) v = float(rng.normal());
        queries.push_back(std::move(gq));
    }
    const double untrained_acc = gender_accuracy_at_k(index, untrained, queries, 10);
    c.expect(std::abs(untrained_acc - 0.5) <= 0.05,
             "untrained accuracy " + fmt(untrained_acc) + " not within 0.5 +- 0.05");

    // Trained model from criterion 4 on a balanced 200-query fixture set.
    testutil::SyntheticParams p;
    p.n_train = 0;
    p.n_held = 200;
    p.seed = 80;  // same generator as criterion 4's corpus
    const auto eval_data = testutil::make_synthetic(p);
    const EmbeddingIndex trained_index = held_out_index(run.model, eval_data);
    std::vector<GenderQuery> trained_queries;
    for (size_t i = 0; i < eval_data.held.size(); ++i) {
        GenderQuery gq;
        gq.gender = *eval_data.held.gender[i];
        gq.description_vec.assign(
            eval_data.held.text.begin() + long(i) * eval_data.text_dim,
            eval_data.held.text.begin() + long(i + 1) * eval_data.text_dim);
        trained_queries.push_back(std::move(gq));
    }
    const double trained_acc =
        gender_accuracy_at_k(trained_index, run.model, trained_queries, 10);
    c.expect(trained_acc >= 0.9, "trained accuracy " + fmt(trained_acc) + " < 0.9");
    detail = "untrained " + fmt(untrained_acc) + " (chance), trained " + fmt(trained_acc);
}

// ---------------------------------------------------------------------------
// Criterion 10: CLI byte-determinism.

struct CliWorld {
    testutil::TempDir dir;
    std::filesystem::path manifest;      // with wav refs + features + vec refs
    std::filesystem::path audio_vecs;
    std::filesystem::path text_vecs;
    std::filesystem::path xvecs;
    std::filesystem::path templates;
    std::filesystem::path template_vecs;
    std::filesystem::path query_vecs;
    std::filesystem::path wav;
};

CliWorld build_cli_world() {
    CliWorld w;
    Rng rng(500);
    const int dim = 8;
    const size_t n = 12;
    VectorStore audio(dim, n), text(dim, n), xv(dim, n);
    for (auto& v : audio.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : text.data) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : xv.data) v = float(rng.uniform(-1.0, 1.0));

    const double freqs[3] = {150.0, 220.0, 330.0};
    std::vector<SegmentRecord> records;
    for (size_t i = 0; i < n; ++i) {
        SegmentRecord r;
        r.id = "seg" + std::to_string(i);
        r.channel_id = "ch" + std::to_string(i % 5);
        r.duration_s = 2.0;
        r.volume_dbfs = -20.0 - double(i);
        r.nisqa_mos = 2.0 + 0.2 * double(i);
        r.mlm_score = -3.0 + 0.1 * double(i);
        r.transcription = "hello " + std::to_string(i);
        r.description = i % 2 == 0 ? "男性の声" : "女性の声";
        r.mora_count = int64_t(8 + i);
        r.gender_label = i % 2 == 0 ? GenderLabel::male : GenderLabel::female;
        r.audio_vec_ref = VecRef{"audio", uint32_t(i)};
        r.text_vec_ref = VecRef{"text", uint32_t(i)};
        r.xvector_ref = VecRef{"xv", uint32_t(i)};
        r.wav_ref = "seg" + std::to_string(i) + ".wav";
        records.push_back(std::move(r));
        write_wav(testutil::make_sine(freqs[i % 3], 2.0),
                  w.dir.file("seg" + std::to_string(i) + ".wav"));
    }
    w.manifest = w.dir.file("manifest.jsonl");
    save_manifest(records, w.manifest);
    w.audio_vecs = w.dir.file("audio.cnvec");
    w.text_vecs = w.dir.file("text.cnvec");
    w.xvecs = w.dir.file("xv.cnvec");
    write_vectors(audio, w.audio_vecs);
    write_vectors(text, w.text_vecs);
    write_vectors(xv, w.xvecs);

    w.templates = w.dir.file("templates.tsv");
    atomic_write_file(w.templates, "male\ta voice of a man\nfemale\ta voice of a woman\n");
    VectorStore tvecs(dim, 2);
    for (auto& v : tvecs.data) v = float(rng.uniform(-1.0, 1.0));
    w.template_vecs = w.dir.file("template.cnvec");
    write_vectors(tvecs, w.template_vecs);

    VectorStore qvecs(dim, 3);
    for (auto& v : qvecs.data) v = float(rng.uniform(-1.0, 1.0));
    w.query_vecs = w.dir.file("query.cnvec");
    write_vectors(qvecs, w.query_vecs);
    w.wav = w.dir.file("seg0.wav");
    return w;
}

int run_vcs(const std::vector<std::string>& args, const std::filesystem::path& stdout_to) {
    std::string cmd = VCS_CLI_PATH;
    for (const auto& a : args) cmd += " '" + a + "'";
    cmd += " > '" + stdout_to.string() + "' 2> /dev/null";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion_reproducibility(Check& c, std::string& detail) {
    const CliWorld w = build_cli_world();
    size_t commands = 0;

    // Each entry: subcommand args with %OUT% placeholders for output paths.
    struct Step {
        std::string name;
        std::vector<std::string> args;   // %1%, %2% replaced by run-specific paths
        std::vector<std::string> outs;   // per-run relative output names
    };
    const std::string m = w.manifest.string();
    std::vector<Step> steps = {
        {"curate filter",
         {"curate", "filter", "--manifest", m, "--out", "%1%", "--report", "%2%"},
         {"kept.jsonl", "report.json"}},
        {"curate cluster",
         {"curate", "cluster", "--manifest", m, "--vectors", w.xvecs.string(), "--k", "4",
          "--seed", "7", "--assignments", "%1%", "--representatives", "%2%", "--tree", "%3%"},
         {"assign.csv", "reps.txt", "tree.csv"}},
        {"curate split",
         {"curate", "split", "--manifest", m, "--fractions", "0.6,0.2,0.2", "--seed", "3",
          "--out", "%1%"},
         {"split.json"}},
        {"curate label-gender",
         {"curate", "label-gender", "--manifest", m, "--out", "%1%"},
         {"labeled.jsonl"}},
        {"features extract",
         {"features", "extract", "--manifest", m, "--wav-root", w.dir.path().string(), "--out",
          "%1%"},
         {"features.jsonl"}},
        {"features stretch",
         {"features", "stretch", "--input", w.wav.string(), "--rate", "1.5", "--output", "%1%"},
         {"stretched.wav"}},
        {"report histograms", {}, {}},  // filled below (directory output)
    };

    auto run_twice = [&](const Step& step) {
        std::vector<std::string> out1, out2;
        for (int run = 1; run <= 2; ++run) {
            std::vector<std::string> args;
            for (const auto& a : step.args) {
                std::string arg = a;
                for (size_t o = 0; o < step.outs.size(); ++o) {
                    const std::string placeholder = "%" + std::to_string(o + 1) + "%";
                    if (arg == placeholder)
                        arg = w.dir.file("run" + std::to_string(run) + "_" + step.outs[o]).string();
                }
                args.push_back(arg);
            }
            const auto stdout_path =
                w.dir.file("run" + std::to_string(run) + "_" + step.name + ".stdout");
            const int rc = run_vcs(args, stdout_path);
            c.expect(rc == 0, step.name + " exited " + std::to_string(rc));
            (run == 1 ? out1 : out2).push_back(testutil::read_text(stdout_path));
            for (const auto& o : step.outs)
                (run == 1 ? out1 : out2)
                    .push_back(testutil::read_text(
                        w.dir.file("run" + std::to_string(run) + "_" + o)));
        }
        c.expect(out1 == out2, step.name + " not byte-deterministic");
        ++commands;
    };

    for (const auto& step : steps) {
        if (step.args.empty()) continue;
        run_twice(step);
    }

    // report histograms (writes into a directory)
    for (int run = 1; run <= 2; ++run) {
        const auto out_dir = w.dir.file("hist" + std::to_string(run));
        const int rc = run_vcs({"report", "histograms", "--manifest", m, "--out-dir",
                                out_dir.string()},
                               w.dir.file("hist_stdout" + std::to_string(run)));
        c.expect(rc == 0, "report histograms exited " + std::to_string(rc));
    }
    c.expect(testutil::read_text(w.dir.file("hist1") / "nisqa_mos_hist.csv") ==
                     testutil::read_text(w.dir.file("hist2") / "nisqa_mos_hist.csv") &&
                 testutil::read_text(w.dir.file("hist1") / "mlm_score_hist.csv") ==
                     testutil::read_text(w.dir.file("hist2") / "mlm_score_hist.csv"),
             "report histograms not byte-deterministic");
    ++commands;

    // train twice (features manifest from the extract step), then the model
    // consumers: index, retrieve, classify, eval gender-at-10, eval zero-shot.
    const std::string fm = w.dir.file("run1_features.jsonl").string();
    for (int run = 1; run <= 2; ++run) {
        const auto out_dir = w.dir.file("train" + std::to_string(run));
        const int rc = run_vcs({"train", "--manifest", fm, "--audio-vecs", w.audio_vecs.string(),
                                "--text-vecs", w.text_vecs.string(), "--out-dir", out_dir.string(),
                                "--batch-size", "4", "--epochs", "2", "--learning-rate", "1e-3",
                                "--embed-dim", "8", "--proj-hidden-dim", "16", "--feat-hidden-dim",
                                "16", "--seed", "9"},
                               w.dir.file("train_stdout" + std::to_string(run)));
        c.expect(rc == 0, "train exited " + std::to_string(rc));
    }
    c.expect(testutil::read_text(w.dir.file("train1") / "checkpoint_final.cnmdl") ==
                     testutil::read_text(w.dir.file("train2") / "checkpoint_final.cnmdl") &&
                 testutil::read_text(w.dir.file("train1") / "train_log.jsonl") ==
                     testutil::read_text(w.dir.file("train2") / "train_log.jsonl") &&
                 testutil::read_text(w.dir.file("train_stdout1")) ==
                     testutil::read_text(w.dir.file("train_stdout2")),
             "train not byte-deterministic");
    ++commands;

    const std::string ckpt = (w.dir.file("train1") / "checkpoint_final.cnmdl").string();
    std::vector<Step> model_steps = {
        {"index",
         {"index", "--checkpoint", ckpt, "--manifest", m, "--audio-vecs", w.audio_vecs.string(),
          "--out-prefix", "%1%"},
         {"idx"}},
        {"retrieve",
         {"retrieve", "--checkpoint", ckpt, "--index-prefix",
          w.dir.file("run1_idx").string(), "--query-vec", w.query_vecs.string(), "--top-k", "5",
          "--out", "%1%"},
         {"retrieved.tsv"}},
        {"classify",
         {"classify", "--checkpoint", ckpt, "--templates", w.templates.string(),
          "--template-vecs", w.template_vecs.string(), "--audio-vecs", w.audio_vecs.string(),
          "--out", "%1%"},
         {"classified.tsv"}},
        {"eval gender-at-10",
         {"eval", "gender-at-10", "--checkpoint", ckpt, "--index-manifest", m, "--audio-vecs",
          w.audio_vecs.string(), "--query-manifest", m, "--text-vecs", w.text_vecs.string(),
          "--out", "%1%"},
         {"gender.tsv"}},
        {"eval zero-shot",
         {"eval", "zero-shot", "--checkpoint", ckpt, "--manifest", m, "--audio-vecs",
          w.audio_vecs.string(), "--templates", w.templates.string(), "--template-vecs",
          w.template_vecs.string(), "--out", "%1%"},
         {"zeroshot.tsv"}},
    };
    for (const auto& step : model_steps) run_twice(step);

    // The index step writes prefix.cnvec / prefix.ids; compare those too.
    c.expect(testutil::read_text(w.dir.file("run1_idx.cnvec")) ==
                     testutil::read_text(w.dir.file("run2_idx.cnvec")) &&
                 testutil::read_text(w.dir.file("run1_idx.ids")) ==
                     testutil::read_text(w.dir.file("run2_idx.ids")),
             "index artifacts not byte-deterministic");

    detail = std::to_string(commands + model_steps.size()) +
             " subcommands run twice, all outputs byte-identical";
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        std::string name;
        std::function<void(Check&, std::string&)> run;
    };
    SyntheticRun synthetic;
    std::string diag_line;

    const std::vector<Criterion> criteria = {
        {1, "gradient correctness vs central finite differences", criterion_gradients},
        {2, "loss identities (ln N, 3-4-5, total = clap + alpha*feat)", criterion_losses},
        {3, "published constants honored by defaults", criterion_constants},
        {4, "end-to-end synthetic training (recall, zero-shot)",
         [&](Check& c, std::string& d) {
             criterion_end_to_end(c, d, synthetic);
             if (c.ok) diag_line = diagnostic_alpha_convergence(synthetic.data);
         }},
        {5, "ward clustering equals the brute-force oracle", criterion_ward},
        {6, "DSP: sine f0 within 2%, WSOLA length and pitch", criterion_dsp},
        {7, "curation golden manifest, idempotent and monotone filters", criterion_curation},
        {8, "channel-disjoint splits within one channel of targets", criterion_split},
        {9, "gender accuracy: chance untrained, >= 0.9 trained",
         [&](Check& c, std::string& d) { criterion_chance_level(c, d, synthetic); }},
        {10, "CLI subcommands byte-deterministic under fixed seeds", criterion_reproducibility},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        Check check;
        std::string detail;
        try {
            criterion.run(check, detail);
        } catch (const std::exception& e) {
            check.expect(false, std::string("exception: ") + e.what());
        }
        if (check.ok) {
            std::cout << "[PASS] criterion " << criterion.id << ": " << criterion.name
                      << (detail.empty() ? "" : " - " + detail) << "\n";
        } else {
            ++failures;
            std::cout << "[FAIL] criterion " << criterion.id << ": " << criterion.name << " - "
                      << check.first_failure << "\n";
        }
        if (criterion.id == 4 && !diag_line.empty()) std::cout << diag_line << "\n";
        std::cout.flush();
    }
    if (failures > 0) {
        std::cout << failures << " of " << criteria.size() << " criteria failed\n";
        return 1;
    }
    std::cout << "all " << criteria.size() << " criteria passed\n";
    return 0;
}
