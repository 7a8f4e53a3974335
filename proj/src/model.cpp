#include "vcs/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

#include "vcs/error.hpp"
#include "vcs/io_util.hpp"
#include "vcs/rng.hpp"

namespace vcs {

using ordered_json = nlohmann::ordered_json;

void validate_config(const ModelConfig& cfg) {
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw Error::validation(std::string("model config: ") + name + " must be positive");
    };
    positive(cfg.audio_in_dim, "audio_in_dim");
    positive(cfg.text_in_dim, "text_in_dim");
    positive(cfg.embed_dim, "embed_dim");
    positive(cfg.proj_hidden_dim, "proj_hidden_dim");
    positive(cfg.feat_hidden_dim, "feat_hidden_dim");
    positive(cfg.feat_out_dim, "feat_out_dim");
    if (!(cfg.tau_init > 0.0)) throw Error::validation("model config: tau_init must be > 0");
}

namespace {

LinearLayer make_linear(int in, int out) {
    LinearLayer l;
    l.in = in;
    l.out = out;
    l.w.assign(size_t(in) * out, 0.0f);
    l.b.assign(size_t(out), 0.0f);
    return l;
}

void append_mlp_layout(ParamLayout& lay, const std::string& name, int in, int hidden, int out) {
    auto add = [&](const std::string& suffix, size_t size) {
        lay.tensors.push_back({name + suffix, lay.total, size});
        lay.total += size;
    };
    add(".w1", size_t(hidden) * in);
    add(".b1", size_t(hidden));
    add(".w2", size_t(out) * hidden);
    add(".b2", size_t(out));
}

struct MlpDims {
    int in = 0, hidden = 0, out = 0;
    size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;  // offsets into the packed vector
};

// Tensor order inside the layout is fixed: the four MLPs then log_tau; each
// MLP contributes w1, b1, w2, b2.
struct PackedOffsets {
    MlpDims proj_audio, proj_text, feat_audio, feat_text;
    size_t log_tau = 0;
};

MlpDims mlp_dims(const ParamLayout& lay, size_t first_tensor, int in, int hidden, int out) {
    MlpDims d;
    d.in = in;
    d.hidden = hidden;
    d.out = out;
    d.w1 = lay.tensors[first_tensor].offset;
    d.b1 = lay.tensors[first_tensor + 1].offset;
    d.w2 = lay.tensors[first_tensor + 2].offset;
    d.b2 = lay.tensors[first_tensor + 3].offset;
    return d;
}

PackedOffsets packed_offsets(const ModelConfig& cfg, const ParamLayout& lay) {
    PackedOffsets o;
    o.proj_audio = mlp_dims(lay, 0, cfg.audio_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    o.proj_text = mlp_dims(lay, 4, cfg.text_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    o.feat_audio = mlp_dims(lay, 8, cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);
    o.feat_text = mlp_dims(lay, 12, cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);
    o.log_tau = lay.log_tau_offset;
    return o;
}

// y = W2 relu(W1 x + b1) + b2, capturing the post-ReLU hidden row.
template <class In>
void mlp_forward_row(const MlpDims& m, const double* p, const In* x, double* hidden, double* y) {
    for (int h = 0; h < m.hidden; ++h) {
        double acc = p[m.b1 + size_t(h)];
        const double* wrow = p + m.w1 + size_t(h) * m.in;
        for (int i = 0; i < m.in; ++i) acc += wrow[i] * double(x[i]);
        hidden[h] = acc > 0.0 ? acc : 0.0;
    }
    for (int o = 0; o < m.out; ++o) {
        double acc = p[m.b2 + size_t(o)];
        const double* wrow = p + m.w2 + size_t(o) * m.hidden;
        for (int h = 0; h < m.hidden; ++h) acc += wrow[h] * hidden[h];
        y[o] = acc;
    }
}

}  // namespace

ParamLayout make_layout(const ModelConfig& cfg) {
    validate_config(cfg);
    ParamLayout lay;
    append_mlp_layout(lay, "proj_audio", cfg.audio_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    append_mlp_layout(lay, "proj_text", cfg.text_in_dim, cfg.proj_hidden_dim, cfg.embed_dim);
    append_mlp_layout(lay, "feat_audio", cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);
    append_mlp_layout(lay, "feat_text", cfg.embed_dim, cfg.feat_hidden_dim, cfg.feat_out_dim);
    lay.log_tau_offset = lay.total;
    lay.tensors.push_back({"log_tau", lay.total, 1});
    lay.total += 1;
    return lay;
}

RetrievalModel init_model(const ModelConfig& cfg) {
    validate_config(cfg);
    RetrievalModel model;
    model.config = cfg;
    model.proj_audio = {make_linear(cfg.audio_in_dim, cfg.proj_hidden_dim),
                        make_linear(cfg.proj_hidden_dim, cfg.embed_dim)};
    model.proj_text = {make_linear(cfg.text_in_dim, cfg.proj_hidden_dim),
                       make_linear(cfg.proj_hidden_dim, cfg.embed_dim)};
    model.feat_audio = {make_linear(cfg.embed_dim, cfg.feat_hidden_dim),
                        make_linear(cfg.feat_hidden_dim, cfg.feat_out_dim)};
    model.feat_text = {make_linear(cfg.embed_dim, cfg.feat_hidden_dim),
                       make_linear(cfg.feat_hidden_dim, cfg.feat_out_dim)};

    Rng rng(cfg.seed);
    auto fill = [&](LinearLayer& l) {
        const double bound = 1.0 / std::sqrt(double(l.in));
        for (auto& v : l.w) v = float(rng.uniform(-bound, bound));
        // biases stay zero
    };
    for (TwoLayerMlp* mlp : {&model.proj_audio, &model.proj_text, &model.feat_audio, &model.feat_text}) {
        fill(mlp->l1);
        fill(mlp->l2);
    }
    const double log_tau = std::log(std::clamp(cfg.tau_init, kTauMin, kTauMax));
    model.log_tau = float(log_tau);
    return model;
}

std::vector<double> pack_params(const RetrievalModel& model) {
    const ParamLayout lay = make_layout(model.config);
    std::vector<double> packed(lay.total, 0.0);
    size_t pos = 0;
    auto put = [&](const std::vector<float>& v) {
        for (const float f : v) packed[pos++] = double(f);
    };
    for (const TwoLayerMlp* mlp :
         {&model.proj_audio, &model.proj_text, &model.feat_audio, &model.feat_text}) {
        put(mlp->l1.w);
        put(mlp->l1.b);
        put(mlp->l2.w);
        put(mlp->l2.b);
    }
    packed[pos++] = double(model.log_tau);
    return packed;
}

void unpack_params(std::span<const double> packed, RetrievalModel& model) {
    const ParamLayout lay = make_layout(model.config);
    if (packed.size() != lay.total)
        throw Error::validation("unpack_params: size mismatch");
    size_t pos = 0;
    auto take = [&](std::vector<float>& v) {
        for (float& f : v) f = float(packed[pos++]);
    };
    for (TwoLayerMlp* mlp :
         {&model.proj_audio, &model.proj_text, &model.feat_audio, &model.feat_text}) {
        take(mlp->l1.w);
        take(mlp->l1.b);
        take(mlp->l2.w);
        take(mlp->l2.b);
    }
    model.log_tau = float(packed[pos++]);
}

namespace detail {

BatchTrace forward_trace(const ModelConfig& cfg, const ParamLayout& layout,
                         std::span<const double> params, std::span<const float> audio_in,
                         std::span<const float> text_in, size_t n) {
    if (n == 0) throw Error::validation("forward: empty batch");
    if (audio_in.size() != n * size_t(cfg.audio_in_dim))
        throw Error::validation("forward: audio input has wrong size");
    if (text_in.size() != n * size_t(cfg.text_in_dim))
        throw Error::validation("forward: text input has wrong size");

    const PackedOffsets off = packed_offsets(cfg, layout);
    const double* p = params.data();

    BatchTrace t;
    t.n = n;
    t.ha = Mat(n, size_t(cfg.proj_hidden_dim));
    t.ht = Mat(n, size_t(cfg.proj_hidden_dim));
    t.va = Mat(n, size_t(cfg.embed_dim));
    t.vt = Mat(n, size_t(cfg.embed_dim));
    t.na.assign(n, 0.0);
    t.nt.assign(n, 0.0);
    t.ea = Mat(n, size_t(cfg.embed_dim));
    t.et = Mat(n, size_t(cfg.embed_dim));
    t.ga = Mat(n, size_t(cfg.feat_hidden_dim));
    t.gt = Mat(n, size_t(cfg.feat_hidden_dim));
    t.fa = Mat(n, size_t(cfg.feat_out_dim));
    t.ft = Mat(n, size_t(cfg.feat_out_dim));
    t.sim = Mat(n, n);
    t.tau = std::exp(p[off.log_tau]);

    auto normalize_row = [&](const Mat& v, std::vector<double>& norm, Mat& e, size_t i,
                             const char* which) {
        double sq = 0.0;
        for (const double x : v.row(i)) sq += x * x;
        const double nrm = std::sqrt(sq);
        if (!(nrm > 0.0))
            throw Error::runtime(std::string("projection produced a zero vector before "
                                             "normalization (row ") +
                                 std::to_string(i) + ", " + which + ")");
        norm[i] = nrm;
        for (int c = 0; c < cfg.embed_dim; ++c) e(i, size_t(c)) = v(i, size_t(c)) / nrm;
    };

    for (size_t i = 0; i < n; ++i) {
        mlp_forward_row(off.proj_audio, p, audio_in.data() + i * size_t(cfg.audio_in_dim),
                        t.ha.row(i).data(), t.va.row(i).data());
        mlp_forward_row(off.proj_text, p, text_in.data() + i * size_t(cfg.text_in_dim),
                        t.ht.row(i).data(), t.vt.row(i).data());
        normalize_row(t.va, t.na, t.ea, i, "audio");
        normalize_row(t.vt, t.nt, t.et, i, "text");
        mlp_forward_row(off.feat_audio, p, t.ea.row(i).data(), t.ga.row(i).data(),
                        t.fa.row(i).data());
        mlp_forward_row(off.feat_text, p, t.et.row(i).data(), t.gt.row(i).data(),
                        t.ft.row(i).data());
    }
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            double dot = 0.0;
            for (int c = 0; c < cfg.embed_dim; ++c) dot += t.ea(i, size_t(c)) * t.et(j, size_t(c));
            t.sim(i, j) = dot / t.tau;
        }
    }
    return t;
}

}  // namespace detail

std::vector<double> project(const RetrievalModel& model, Modality modality,
                            std::span<const float> x) {
    const ModelConfig& cfg = model.config;
    const int in_dim = modality == Modality::audio ? cfg.audio_in_dim : cfg.text_in_dim;
    if (x.size() != size_t(in_dim))
        throw Error::validation("project: input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(in_dim));
    const TwoLayerMlp& mlp = modality == Modality::audio ? model.proj_audio : model.proj_text;

    std::vector<double> hidden(size_t(cfg.proj_hidden_dim));
    for (int h = 0; h < cfg.proj_hidden_dim; ++h) {
        double acc = double(mlp.l1.b[size_t(h)]);
        for (int i = 0; i < in_dim; ++i)
            acc += double(mlp.l1.w[size_t(h) * in_dim + i]) * double(x[size_t(i)]);
        hidden[size_t(h)] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> y(size_t(cfg.embed_dim));
    double sq = 0.0;
    for (int o = 0; o < cfg.embed_dim; ++o) {
        double acc = double(mlp.l2.b[size_t(o)]);
        for (int h = 0; h < cfg.proj_hidden_dim; ++h)
            acc += double(mlp.l2.w[size_t(o) * cfg.proj_hidden_dim + h]) * hidden[size_t(h)];
        y[size_t(o)] = acc;
        sq += acc * acc;
    }
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0))
        throw Error::runtime("project: zero vector before normalization");
    for (double& v : y) v /= norm;
    return y;
}

std::array<double, 3> predict_features(const RetrievalModel& model, Modality modality,
                                       std::span<const double> embedding) {
    const ModelConfig& cfg = model.config;
    if (embedding.size() != size_t(cfg.embed_dim))
        throw Error::validation("predict_features: embedding has dimension " +
                                std::to_string(embedding.size()) + ", expected " +
                                std::to_string(cfg.embed_dim));
    if (cfg.feat_out_dim != 3)
        throw Error::validation("predict_features: feat_out_dim must be 3");
    const TwoLayerMlp& mlp = modality == Modality::audio ? model.feat_audio : model.feat_text;

    std::vector<double> hidden(size_t(cfg.feat_hidden_dim));
    for (int h = 0; h < cfg.feat_hidden_dim; ++h) {
        double acc = double(mlp.l1.b[size_t(h)]);
        for (int i = 0; i < cfg.embed_dim; ++i)
            acc += double(mlp.l1.w[size_t(h) * cfg.embed_dim + i]) * embedding[size_t(i)];
        hidden[size_t(h)] = acc > 0.0 ? acc : 0.0;
    }
    std::array<double, 3> out{};
    for (int o = 0; o < 3; ++o) {
        double acc = double(mlp.l2.b[size_t(o)]);
        for (int h = 0; h < cfg.feat_hidden_dim; ++h)
            acc += double(mlp.l2.w[size_t(o) * cfg.feat_hidden_dim + h]) * hidden[size_t(h)];
        out[size_t(o)] = acc;
    }
    return out;
}

ForwardResult forward_batch(const RetrievalModel& model, std::span<const float> audio_in,
                            std::span<const float> text_in, size_t n) {
    const ParamLayout lay = make_layout(model.config);
    const std::vector<double> params = pack_params(model);
    detail::BatchTrace t = detail::forward_trace(model.config, lay, params, audio_in, text_in, n);
    ForwardResult r;
    r.ea = std::move(t.ea);
    r.et = std::move(t.et);
    r.fa = std::move(t.fa);
    r.ft = std::move(t.ft);
    r.sim = std::move(t.sim);
    return r;
}

namespace {

constexpr char kCheckpointMagic[8] = {'C', 'N', 'M', 'D', 'L', '1', '\0', '\0'};

}  // namespace

void save_checkpoint(const RetrievalModel& model, const std::filesystem::path& path) {
    ordered_json header;
    header["format_version"] = 1;
    header["audio_in_dim"] = model.config.audio_in_dim;
    header["text_in_dim"] = model.config.text_in_dim;
    header["embed_dim"] = model.config.embed_dim;
    header["proj_hidden_dim"] = model.config.proj_hidden_dim;
    header["feat_hidden_dim"] = model.config.feat_hidden_dim;
    header["feat_out_dim"] = model.config.feat_out_dim;
    header["tau_init"] = model.config.tau_init;
    header["tau_learnable"] = model.config.tau_learnable;
    header["seed"] = model.config.seed;
    if (model.normalizer) {
        header["normalizer"] = {{"mean", model.normalizer->mean}, {"std", model.normalizer->std}};
    } else {
        header["normalizer"] = nullptr;
    }
    const std::string header_str = header.dump();

    const std::vector<double> packed = pack_params(model);
    std::string bytes;
    bytes.reserve(16 + header_str.size() + 8 + packed.size() * 4);
    bytes.append(kCheckpointMagic, 8);
    put_u32le(bytes, static_cast<uint32_t>(header_str.size()));
    bytes.append(header_str);
    put_u64le(bytes, packed.size());
    for (const double v : packed) put_f32le(bytes, float(v));
    atomic_write_file(path, bytes);
}

RetrievalModel load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 12 || std::memcmp(p, kCheckpointMagic, 8) != 0)
        throw Error::validation("not a model checkpoint (bad magic or version): " + path.string());
    const uint32_t header_len = get_u32le(p + 8);
    if (bytes.size() < 12 + size_t(header_len) + 8)
        throw Error::validation("corrupt checkpoint (truncated header): " + path.string());

    ordered_json header =
        ordered_json::parse(bytes.substr(12, header_len), nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw Error::validation("corrupt checkpoint (bad header): " + path.string());
    if (!header.contains("format_version") || header["format_version"].get<int>() != 1)
        throw Error::validation("unsupported checkpoint version: " + path.string());

    ModelConfig cfg;
    try {
        cfg.audio_in_dim = header.at("audio_in_dim").get<int>();
        cfg.text_in_dim = header.at("text_in_dim").get<int>();
        cfg.embed_dim = header.at("embed_dim").get<int>();
        cfg.proj_hidden_dim = header.at("proj_hidden_dim").get<int>();
        cfg.feat_hidden_dim = header.at("feat_hidden_dim").get<int>();
        cfg.feat_out_dim = header.at("feat_out_dim").get<int>();
        cfg.tau_init = header.at("tau_init").get<double>();
        cfg.tau_learnable = header.at("tau_learnable").get<bool>();
        cfg.seed = header.at("seed").get<uint64_t>();
    } catch (const ordered_json::exception&) {
        throw Error::validation("corrupt checkpoint (bad header fields): " + path.string());
    }
    validate_config(cfg);

    RetrievalModel model = init_model(cfg);
    if (!header.at("normalizer").is_null()) {
        FeatureNormalizer norm;
        const auto& jn = header.at("normalizer");
        for (int d = 0; d < 3; ++d) {
            norm.mean[size_t(d)] = jn.at("mean").at(size_t(d)).get<double>();
            norm.std[size_t(d)] = jn.at("std").at(size_t(d)).get<double>();
            if (!(norm.std[size_t(d)] > 0.0))
                throw Error::validation("corrupt checkpoint (non-positive normalizer std)");
        }
        model.normalizer = norm;
    }

    const ParamLayout lay = make_layout(cfg);
    const size_t params_off = 12 + header_len;
    const uint64_t count = get_u64le(p + params_off);
    if (count != lay.total)
        throw Error::validation("corrupt checkpoint (parameter count mismatch): " + path.string());
    if (bytes.size() != params_off + 8 + count * 4)
        throw Error::validation("corrupt checkpoint (truncated parameters): " + path.string());

    std::vector<double> packed(count);
    for (size_t i = 0; i < count; ++i) {
        const float f = get_f32le(p + params_off + 8 + i * 4);
        if (!std::isfinite(f))
            throw Error::validation("corrupt checkpoint (non-finite parameter): " + path.string());
        packed[i] = double(f);
    }
    unpack_params(packed, model);
    return model;
}

}  // namespace vcs
