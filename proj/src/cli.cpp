#include "vcs/cli.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

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

namespace vcs {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

ordered_json load_json_config(const std::string& path) {
    ordered_json j = ordered_json::parse(read_file_bytes(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error::validation("config file is not a JSON object: " + path);
    return j;
}

template <class T>
void from_config(const ordered_json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const ordered_json::exception&) {
        throw Error::validation(std::string("config field '") + key + "' has the wrong type");
    }
}

// Results go to the file when given, otherwise to stdout.
void emit(const std::optional<std::string>& out_path, const std::string& text) {
    if (out_path) {
        atomic_write_file(*out_path, text);
    } else {
        std::cout << text;
    }
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

// ---------------------------------------------------------------- curate

struct FilterArgs {
    std::string manifest, out;
    std::optional<std::string> report;
    std::optional<std::string> config;
    FilterThresholds thresholds;
    CLI::Option *min_dur = nullptr, *max_dur = nullptr, *min_vol = nullptr, *min_mos = nullptr,
                *max_mlm = nullptr;
};

void run_curate_filter(const FilterArgs& args) {
    FilterThresholds t;
    if (args.config) {
        const ordered_json j = load_json_config(*args.config);
        if (j.contains("thresholds")) {
            const auto& jt = j.at("thresholds");
            from_config(jt, "min_duration_s", t.min_duration_s);
            from_config(jt, "max_duration_s", t.max_duration_s);
            from_config(jt, "min_volume_dbfs", t.min_volume_dbfs);
            from_config(jt, "min_nisqa_mos", t.min_nisqa_mos);
            from_config(jt, "max_mlm_score", t.max_mlm_score);
        }
    }
    if (args.min_dur->count()) t.min_duration_s = args.thresholds.min_duration_s;
    if (args.max_dur->count()) t.max_duration_s = args.thresholds.max_duration_s;
    if (args.min_vol->count()) t.min_volume_dbfs = args.thresholds.min_volume_dbfs;
    if (args.min_mos->count()) t.min_nisqa_mos = args.thresholds.min_nisqa_mos;
    if (args.max_mlm->count()) t.max_mlm_score = args.thresholds.max_mlm_score;

    const auto records = load_manifest(args.manifest);
    auto [kept, report] = apply_quality_filters(records, t);
    save_manifest(kept, args.out);

    ordered_json jr;
    jr["input"] = report.input;
    jr["kept"] = report.kept;
    jr["rejected"] = ordered_json::object();
    for (const char* reason : kRejectReasons) jr["rejected"][reason] = report.rejected[reason];
    emit(args.report, jr.dump() + "\n");
}

struct ClusterArgs {
    std::string manifest, vectors, assignments;
    std::optional<std::string> representatives, tree;
    int k = 0;
    uint64_t seed = 0;
};

void run_curate_cluster(const ClusterArgs& args) {
    const auto records = load_manifest(args.manifest);
    const VectorStore store = read_vectors(args.vectors);
    if (records.empty()) throw Error::validation("cluster: empty manifest");

    VectorStore sub(store.dim, records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        if (!rec.xvector_ref)
            throw Error::validation("record " + rec.id + ": missing xvector_ref");
        if (rec.xvector_ref->row >= store.count())
            throw Error::validation("record " + rec.id + ": xvector_ref row out of range");
        const auto row = store.row(rec.xvector_ref->row);
        std::copy(row.begin(), row.end(), sub.row(i).begin());
    }

    const WardResult result = ward_cluster(sub, args.k);

    std::string csv = "id,cluster\n";
    std::vector<std::pair<std::string, int>> assignment;
    for (size_t i = 0; i < records.size(); ++i) {
        csv += records[i].id + "," + std::to_string(result.assignment[i]) + "\n";
        assignment.emplace_back(records[i].id, result.assignment[i]);
    }
    atomic_write_file(args.assignments, csv);

    if (args.tree) {
        std::string tree_csv = "a,b,distance,merged_id\n";
        for (const auto& m : result.tree.merges) {
            tree_csv += std::to_string(m.a) + "," + std::to_string(m.b) + "," +
                        format_double(m.distance, 17) + "," + std::to_string(m.merged_id) + "\n";
        }
        atomic_write_file(*args.tree, tree_csv);
    }
    if (args.representatives) {
        std::string reps;
        for (const auto& id : select_representatives(assignment, args.seed)) reps += id + "\n";
        atomic_write_file(*args.representatives, reps);
    }
}

struct SplitArgs {
    std::string manifest, out;
    std::string fractions = "0.8,0.1,0.1";
    uint64_t seed = 0;
};

void run_curate_split(const SplitArgs& args) {
    const auto parts = split_commas(args.fractions);
    if (parts.size() != 3)
        throw Error::usage("--fractions must be three comma-separated numbers");
    std::array<double, 3> fractions{};
    for (int i = 0; i < 3; ++i) {
        try {
            fractions[size_t(i)] = std::stod(parts[size_t(i)]);
        } catch (const std::exception&) {
            throw Error::usage("--fractions must be three comma-separated numbers");
        }
    }
    const auto records = load_manifest(args.manifest);
    const DatasetSplit split = split_by_channel(records, fractions, args.seed);
    validate_split(split, records);
    save_split(split, args.out);
}

struct LabelGenderArgs {
    std::string manifest, out;
    std::optional<std::string> male_chars, female_chars;
};

void run_curate_label_gender(const LabelGenderArgs& args) {
    GenderMarkers markers;
    if (args.male_chars) markers.male = split_commas(*args.male_chars);
    if (args.female_chars) markers.female = split_commas(*args.female_chars);
    auto records = load_manifest(args.manifest);
    for (auto& rec : records)
        rec.gender_label = label_gender_from_description(rec.description.value_or(""), markers);
    save_manifest(records, args.out);
}

// ---------------------------------------------------------------- features

struct ExtractArgs {
    std::string manifest, out;
    std::string wav_root = ".";
    std::string on_unvoiced = "error";
};

void run_features_extract(const ExtractArgs& args) {
    auto records = load_manifest(args.manifest);
    std::vector<SegmentRecord> out;
    size_t dropped = 0;
    for (auto& rec : records) {
        if (!rec.wav_ref) throw Error::validation("record " + rec.id + ": missing wav_ref");
        const Waveform w = read_wav(fs::path(args.wav_root) / *rec.wav_ref);
        const auto f0 = extract_f0_mean(w);
        if (!f0) {
            if (args.on_unvoiced == "drop") {
                ++dropped;
                continue;
            }
            throw Error::validation("record " + rec.id + ": unvoiced segment, no F0");
        }
        const SpeechFeatures f = extract_features(rec, w);
        rec.f0_mean_hz = f.f0_mean_hz;
        rec.energy_std = f.energy_std;
        rec.speaking_rate = f.speaking_rate;
        out.push_back(rec);
    }
    if (dropped > 0) std::cerr << "features extract: dropped " << dropped << " unvoiced segments\n";
    save_manifest(out, args.out);
}

struct StretchArgs {
    std::string input, output;
    double rate = 1.0;
};

void run_features_stretch(const StretchArgs& args) {
    write_wav(time_stretch_wsola(read_wav(args.input), args.rate), args.output);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string manifest, audio_vecs, text_vecs, out_dir;
    std::optional<std::string> split;
    std::optional<std::string> config;
    ModelConfig model;
    TrainConfig tcfg;
    bool tau_fixed = false;
    CLI::Option *alpha = nullptr, *seed = nullptr, *epochs = nullptr, *batch = nullptr,
                *lr = nullptr, *ckpt = nullptr, *embed = nullptr, *proj_hidden = nullptr,
                *feat_hidden = nullptr, *tau_init = nullptr;
};

TrainingSet gather_training_set(const std::vector<SegmentRecord>& records,
                                const std::set<std::string>* keep, const VectorStore& audio,
                                const VectorStore& text) {
    TrainingSet set;
    for (const auto& rec : records) {
        if (keep && !keep->count(rec.id)) continue;
        if (!rec.audio_vec_ref || !rec.text_vec_ref)
            throw Error::validation("record " + rec.id + ": training needs audio_vec_ref and text_vec_ref");
        if (rec.audio_vec_ref->row >= audio.count() || rec.text_vec_ref->row >= text.count())
            throw Error::validation("record " + rec.id + ": vec_ref row out of range");
        if (!rec.f0_mean_hz || !rec.energy_std || !rec.speaking_rate)
            throw Error::validation("record " + rec.id +
                                    ": missing speech features (run `features extract` first)");
        set.ids.push_back(rec.id);
        const auto arow = audio.row(rec.audio_vec_ref->row);
        const auto trow = text.row(rec.text_vec_ref->row);
        set.audio.insert(set.audio.end(), arow.begin(), arow.end());
        set.text.insert(set.text.end(), trow.begin(), trow.end());
        set.features.push_back({*rec.f0_mean_hz, *rec.energy_std, *rec.speaking_rate});
        set.gender.push_back(rec.gender_label);
    }
    return set;
}

void run_train(const TrainArgs& args) {
    ModelConfig mcfg;
    TrainConfig tcfg;
    if (args.config) {
        const ordered_json j = load_json_config(*args.config);
        if (j.contains("model")) {
            const auto& jm = j.at("model");
            from_config(jm, "embed_dim", mcfg.embed_dim);
            from_config(jm, "proj_hidden_dim", mcfg.proj_hidden_dim);
            from_config(jm, "feat_hidden_dim", mcfg.feat_hidden_dim);
            from_config(jm, "tau_init", mcfg.tau_init);
            from_config(jm, "tau_learnable", mcfg.tau_learnable);
        }
        if (j.contains("train")) {
            const auto& jt = j.at("train");
            from_config(jt, "learning_rate", tcfg.learning_rate);
            from_config(jt, "batch_size", tcfg.batch_size);
            from_config(jt, "epochs", tcfg.epochs);
            from_config(jt, "checkpoint_every", tcfg.checkpoint_every);
            from_config(jt, "alpha", tcfg.alpha);
            from_config(jt, "seed", tcfg.seed);
        }
    }
    if (args.embed->count()) mcfg.embed_dim = args.model.embed_dim;
    if (args.proj_hidden->count()) mcfg.proj_hidden_dim = args.model.proj_hidden_dim;
    if (args.feat_hidden->count()) mcfg.feat_hidden_dim = args.model.feat_hidden_dim;
    if (args.tau_init->count()) mcfg.tau_init = args.model.tau_init;
    if (args.tau_fixed) mcfg.tau_learnable = false;
    if (args.alpha->count()) tcfg.alpha = args.tcfg.alpha;
    if (args.seed->count()) tcfg.seed = args.tcfg.seed;
    if (args.epochs->count()) tcfg.epochs = args.tcfg.epochs;
    if (args.batch->count()) tcfg.batch_size = args.tcfg.batch_size;
    if (args.lr->count()) tcfg.learning_rate = args.tcfg.learning_rate;
    if (args.ckpt->count()) tcfg.checkpoint_every = args.tcfg.checkpoint_every;
    mcfg.seed = tcfg.seed;

    const auto records = load_manifest(args.manifest);
    const VectorStore audio = read_vectors(args.audio_vecs);
    const VectorStore text = read_vectors(args.text_vecs);
    mcfg.audio_in_dim = int(audio.dim);
    mcfg.text_in_dim = int(text.dim);

    TrainingSet train_set, valid_set;
    if (args.split) {
        const DatasetSplit split = load_split(*args.split);
        const std::set<std::string> train_ids(split.train.begin(), split.train.end());
        const std::set<std::string> valid_ids(split.valid.begin(), split.valid.end());
        train_set = gather_training_set(records, &train_ids, audio, text);
        valid_set = gather_training_set(records, &valid_ids, audio, text);
    } else {
        train_set = gather_training_set(records, nullptr, audio, text);
    }

    fs::create_directories(args.out_dir);
    const fs::path out_dir(args.out_dir);
    const TrainResult result = train(init_model(mcfg), train_set, valid_set, tcfg, &out_dir);

    std::string log_text;
    for (const auto& e : result.log) {
        ordered_json j;
        j["epoch"] = e.epoch;
        j["l_clap"] = e.mean_loss.l_clap;
        j["l_feat_audio"] = e.mean_loss.l_feat_audio;
        j["l_feat_text"] = e.mean_loss.l_feat_text;
        j["l_feat_cross"] = e.mean_loss.l_feat_cross;
        j["l_feat"] = e.mean_loss.l_feat;
        j["total"] = e.mean_loss.total;
        if (e.valid_gender_acc_at_10) {
            j["valid_gender_acc_at_10"] = *e.valid_gender_acc_at_10;
        } else {
            j["valid_gender_acc_at_10"] = nullptr;
        }
        log_text += j.dump() + "\n";
    }
    atomic_write_file(out_dir / "train_log.jsonl", log_text);
    std::cout << "best_epoch\t" << result.best_epoch << "\n";
}

// ---------------------------------------------------------------- index/retrieve

struct IndexArgs {
    std::string checkpoint, manifest, audio_vecs, out_prefix;
};

void run_index(const IndexArgs& args) {
    const RetrievalModel model = load_checkpoint(args.checkpoint);
    const auto records = load_manifest(args.manifest);
    const VectorStore audio = read_vectors(args.audio_vecs);
    const EmbeddingIndex index = build_index(model, records, audio);

    VectorStore out(uint32_t(model.config.embed_dim), index.size());
    for (size_t i = 0; i < index.size(); ++i) {
        const auto row = index.vectors.row(i);
        for (size_t c = 0; c < row.size(); ++c) out.row(i)[c] = float(row[c]);
    }
    write_vectors(out, args.out_prefix + ".cnvec");
    std::string ids;
    for (const auto& id : index.ids) ids += id + "\n";
    atomic_write_file(args.out_prefix + ".ids", ids);
}

struct RetrieveArgs {
    std::string checkpoint, index_prefix, query_vecs;
    size_t top_k = 10;
    std::optional<std::string> out;
};

void run_retrieve(const RetrieveArgs& args) {
    const RetrievalModel model = load_checkpoint(args.checkpoint);
    const VectorStore vectors = read_vectors(args.index_prefix + ".cnvec");
    const std::string ids_text = read_file_bytes(args.index_prefix + ".ids");

    EmbeddingIndex index;
    {
        std::istringstream in(ids_text);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            index.row_of.emplace(line, index.ids.size());
            index.ids.push_back(line);
        }
    }
    if (index.ids.size() != vectors.count())
        throw Error::validation("index id list and vector store disagree on size");
    index.vectors = Mat(vectors.count(), vectors.dim);
    for (size_t i = 0; i < vectors.count(); ++i) {
        const auto row = vectors.row(i);
        for (size_t c = 0; c < row.size(); ++c) index.vectors(i, c) = double(row[c]);
    }

    const VectorStore queries = read_vectors(args.query_vecs);
    std::string out_text;
    for (size_t q = 0; q < queries.count(); ++q) {
        const auto hits = retrieve_topk(index, model, queries.row(q), args.top_k);
        for (size_t r = 0; r < hits.size(); ++r) {
            out_text += std::to_string(q) + "\t" + std::to_string(r + 1) + "\t" + hits[r].id +
                        "\t" + format_fixed(hits[r].score, 6) + "\n";
        }
    }
    emit(args.out, out_text);
}

// ---------------------------------------------------------------- classify/eval

struct TemplateFileArgs {
    std::string templates, template_vecs;
};

TemplateSet load_templates(const TemplateFileArgs& args) {
    const VectorStore vecs = read_vectors(args.template_vecs);
    TemplateSet set;
    std::istringstream in(read_file_bytes(args.templates));
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error::validation("templates line " + std::to_string(line_no) +
                                    ": expected 'label<TAB>phrase'");
        TemplateEntry entry;
        entry.label = line.substr(0, tab);
        entry.phrase = line.substr(tab + 1);
        if (set.entries.size() >= vecs.count())
            throw Error::validation("more template lines than template vectors");
        const auto row = vecs.row(set.entries.size());
        entry.text_vec.assign(row.begin(), row.end());
        set.entries.push_back(std::move(entry));
    }
    if (set.entries.size() != vecs.count())
        throw Error::validation("template line count and vector count disagree");
    return set;
}

struct ClassifyArgs {
    std::string checkpoint, audio_vecs;
    TemplateFileArgs templates;
    std::optional<std::string> out;
};

void run_classify(const ClassifyArgs& args) {
    const RetrievalModel model = load_checkpoint(args.checkpoint);
    const TemplateSet templates = load_templates(args.templates);
    const VectorStore audio = read_vectors(args.audio_vecs);
    std::string out_text;
    for (size_t i = 0; i < audio.count(); ++i) {
        const auto embedding = project(model, Modality::audio, audio.row(i));
        out_text += std::to_string(i) + "\t" +
                    zero_shot_classify(model, embedding, templates) + "\n";
    }
    emit(args.out, out_text);
}

struct EvalGenderArgs {
    std::string checkpoint, index_manifest, audio_vecs, query_manifest, text_vecs;
    size_t k = 10;
    std::optional<std::string> out;
};

void run_eval_gender(const EvalGenderArgs& args) {
    const RetrievalModel model = load_checkpoint(args.checkpoint);
    const auto index_records = load_manifest(args.index_manifest);
    const VectorStore audio = read_vectors(args.audio_vecs);
    const EmbeddingIndex index = build_index(model, index_records, audio);

    const auto query_records = load_manifest(args.query_manifest);
    const VectorStore text = read_vectors(args.text_vecs);
    std::vector<GenderQuery> queries;
    for (const auto& rec : query_records) {
        if (!rec.gender_label ||
            (*rec.gender_label != GenderLabel::male && *rec.gender_label != GenderLabel::female))
            continue;  // the metric is binary
        if (!rec.text_vec_ref)
            throw Error::validation("query record " + rec.id + ": missing text_vec_ref");
        if (rec.text_vec_ref->row >= text.count())
            throw Error::validation("query record " + rec.id + ": text_vec_ref row out of range");
        GenderQuery q;
        q.gender = *rec.gender_label;
        const auto row = text.row(rec.text_vec_ref->row);
        q.description_vec.assign(row.begin(), row.end());
        queries.push_back(std::move(q));
    }
    const double acc = gender_accuracy_at_k(index, model, queries, args.k);
    emit(args.out, "gender_accuracy_at_" + std::to_string(args.k) + "\t" +
                       format_fixed(acc, 6) + "\n");
}

struct EvalZeroShotArgs {
    std::string checkpoint, manifest, audio_vecs;
    TemplateFileArgs templates;
    std::optional<std::string> truth_csv;
    std::optional<std::string> out;
};

void run_eval_zero_shot(const EvalZeroShotArgs& args) {
    const RetrievalModel model = load_checkpoint(args.checkpoint);
    const TemplateSet templates = load_templates(args.templates);
    const auto records = load_manifest(args.manifest);
    const VectorStore audio = read_vectors(args.audio_vecs);

    std::map<std::string, std::string> truth_by_id;
    if (args.truth_csv) {
        std::istringstream in(read_file_bytes(*args.truth_csv));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const size_t comma = line.find(',');
            if (comma == std::string::npos)
                throw Error::validation("truth csv: expected 'id,label' lines");
            truth_by_id[line.substr(0, comma)] = line.substr(comma + 1);
        }
    }

    std::vector<std::string> predictions, labels;
    for (const auto& rec : records) {
        std::string truth;
        if (args.truth_csv) {
            const auto it = truth_by_id.find(rec.id);
            if (it == truth_by_id.end())
                throw Error::validation("truth csv: no label for record " + rec.id);
            truth = it->second;
        } else {
            if (!rec.gender_label)
                throw Error::validation("record " + rec.id + ": missing gender_label truth");
            truth = to_string(*rec.gender_label);
        }
        if (!rec.audio_vec_ref)
            throw Error::validation("record " + rec.id + ": missing audio_vec_ref");
        if (rec.audio_vec_ref->row >= audio.count())
            throw Error::validation("record " + rec.id + ": audio_vec_ref row out of range");
        const auto embedding = project(model, Modality::audio, audio.row(rec.audio_vec_ref->row));
        predictions.push_back(zero_shot_classify(model, embedding, templates));
        labels.push_back(truth);
    }
    std::string out_text;
    for (const auto& [label, acc] : classification_accuracy(predictions, labels))
        out_text += label + "\t" + format_fixed(acc, 6) + "\n";
    emit(args.out, out_text);
}

// ---------------------------------------------------------------- report

struct HistogramArgs {
    std::string manifest, out_dir;
    double bin_width = 0.1;
};

void run_report_histograms(const HistogramArgs& args) {
    if (!(args.bin_width > 0.0)) throw Error::validation("--bin-width must be > 0");
    const auto records = load_manifest(args.manifest);
    fs::create_directories(args.out_dir);

    auto write_hist = [&](const char* field, auto getter) {
        std::map<long long, size_t> bins;
        for (const auto& rec : records) {
            const auto v = getter(rec);
            if (!v) continue;
            bins[static_cast<long long>(std::floor(*v / args.bin_width))]++;
        }
        std::string csv = "value,count\n";
        for (const auto& [bin, count] : bins)
            csv += format_double(double(bin) * args.bin_width, 6) + "," + std::to_string(count) + "\n";
        atomic_write_file(fs::path(args.out_dir) / (std::string(field) + "_hist.csv"), csv);
    };
    write_hist("nisqa_mos", [](const SegmentRecord& r) { return r.nisqa_mos; });
    write_hist("mlm_score", [](const SegmentRecord& r) { return r.mlm_score; });
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Cross-modal retrieval of speech from voice-characteristics descriptions:\n"
                 "corpus curation, feature extraction, contrastive training, and evaluation."};
    app.require_subcommand(1);

    // curate
    auto* curate = app.add_subcommand("curate", "Corpus curation: filters, clustering, splits");
    curate->require_subcommand(1);

    FilterArgs filter_args;
    auto* cf = curate->add_subcommand("filter", "Apply quality-assurance threshold filters");
    cf->add_option("--manifest", filter_args.manifest, "Input manifest (JSONL)")->required();
    cf->add_option("--out", filter_args.out, "Output manifest of kept records")->required();
    cf->add_option("--report", filter_args.report, "Rejection report path (default: stdout)");
    cf->add_option("--config", filter_args.config, "JSON config with a thresholds section");
    filter_args.min_dur = cf->add_option("--min-duration", filter_args.thresholds.min_duration_s,
                                         "Minimum duration in seconds (default 2)");
    filter_args.max_dur = cf->add_option("--max-duration", filter_args.thresholds.max_duration_s,
                                         "Maximum duration in seconds (default 10)");
    filter_args.min_vol = cf->add_option("--min-volume", filter_args.thresholds.min_volume_dbfs,
                                         "Keep volume strictly above this dBFS (default -55)");
    filter_args.min_mos = cf->add_option("--min-nisqa", filter_args.thresholds.min_nisqa_mos,
                                         "Minimum NISQA MOS (default 2)");
    filter_args.max_mlm = cf->add_option("--max-mlm", filter_args.thresholds.max_mlm_score,
                                         "Keep MLM score strictly below this (default -0.01)");
    cf->callback([&]() { run_curate_filter(filter_args); });

    ClusterArgs cluster_args;
    auto* cc = curate->add_subcommand("cluster", "Ward clustering of x-vectors");
    cc->add_option("--manifest", cluster_args.manifest, "Manifest with xvector_ref fields")->required();
    cc->add_option("--vectors", cluster_args.vectors, "x-vector store (.cnvec)")->required();
    cc->add_option("--k", cluster_args.k, "Target cluster count")->required();
    cc->add_option("--assignments", cluster_args.assignments, "Output CSV id,cluster")->required();
    cc->add_option("--representatives", cluster_args.representatives,
                   "Output path for one representative id per cluster");
    cc->add_option("--tree", cluster_args.tree, "Output CSV of the merge tree");
    cc->add_option("--seed", cluster_args.seed, "Seed for representative selection");
    cc->callback([&]() { run_curate_cluster(cluster_args); });

    SplitArgs split_args;
    auto* cs = curate->add_subcommand("split", "Channel-disjoint train/valid/test split");
    cs->add_option("--manifest", split_args.manifest, "Input manifest")->required();
    cs->add_option("--out", split_args.out, "Output split JSON")->required();
    cs->add_option("--fractions", split_args.fractions, "train,valid,test (default 0.8,0.1,0.1)");
    cs->add_option("--seed", split_args.seed, "Shuffle seed");
    cs->callback([&]() { run_curate_split(split_args); });

    LabelGenderArgs gender_args;
    auto* cg = curate->add_subcommand("label-gender", "Auto-label gender from descriptions");
    cg->add_option("--manifest", gender_args.manifest, "Input manifest")->required();
    cg->add_option("--out", gender_args.out, "Output manifest")->required();
    cg->add_option("--male-chars", gender_args.male_chars, "Comma-separated male markers");
    cg->add_option("--female-chars", gender_args.female_chars, "Comma-separated female markers");
    cg->callback([&]() { run_curate_label_gender(gender_args); });

    // features
    auto* features = app.add_subcommand("features", "Speech feature extraction and stretching");
    features->require_subcommand(1);

    ExtractArgs extract_args;
    auto* fe = features->add_subcommand("extract", "Compute F0 mean / energy std / speaking rate");
    fe->add_option("--manifest", extract_args.manifest, "Input manifest with wav_ref")->required();
    fe->add_option("--out", extract_args.out, "Output manifest with feature columns")->required();
    fe->add_option("--wav-root", extract_args.wav_root, "Directory wav_ref paths are relative to");
    fe->add_option("--on-unvoiced", extract_args.on_unvoiced, "error|drop (default error)")
        ->check(CLI::IsMember({"error", "drop"}));
    fe->callback([&]() { run_features_extract(extract_args); });

    StretchArgs stretch_args;
    auto* fsub = features->add_subcommand("stretch", "WSOLA time-scale modification");
    fsub->add_option("--input", stretch_args.input, "Input WAV")->required();
    fsub->add_option("--output", stretch_args.output, "Output WAV")->required();
    fsub->add_option("--rate", stretch_args.rate, "Speed factor in [0.5, 2.0]")->required();
    fsub->callback([&]() { run_features_stretch(stretch_args); });

    // train
    TrainArgs train_args;
    auto* tr = app.add_subcommand("train", "Train projection and feature heads");
    tr->add_option("--manifest", train_args.manifest, "Manifest with vec refs and features")->required();
    tr->add_option("--audio-vecs", train_args.audio_vecs, "Audio encoder vectors (.cnvec)")->required();
    tr->add_option("--text-vecs", train_args.text_vecs, "Text encoder vectors (.cnvec)")->required();
    tr->add_option("--out-dir", train_args.out_dir, "Directory for checkpoints and the log")->required();
    tr->add_option("--split", train_args.split, "Split JSON (train/valid subsets)");
    tr->add_option("--config", train_args.config, "JSON config with model/train sections");
    train_args.alpha = tr->add_option("--alpha", train_args.tcfg.alpha,
                                      "Feature-loss weight (default 1.0)");
    train_args.seed = tr->add_option("--seed", train_args.tcfg.seed, "Training seed");
    train_args.epochs = tr->add_option("--epochs", train_args.tcfg.epochs, "Epochs (default 90)");
    train_args.batch = tr->add_option("--batch-size", train_args.tcfg.batch_size,
                                      "Batch size (default 48)");
    train_args.lr = tr->add_option("--learning-rate", train_args.tcfg.learning_rate,
                                   "Learning rate (default 5e-6)");
    train_args.ckpt = tr->add_option("--checkpoint-every", train_args.tcfg.checkpoint_every,
                                     "Checkpoint interval in epochs (default 5)");
    train_args.embed = tr->add_option("--embed-dim", train_args.model.embed_dim,
                                      "Embedding dimensionality (default 512)");
    train_args.proj_hidden = tr->add_option("--proj-hidden-dim", train_args.model.proj_hidden_dim,
                                            "Projection head hidden size (default 512)");
    train_args.feat_hidden = tr->add_option("--feat-hidden-dim", train_args.model.feat_hidden_dim,
                                            "Feature head hidden size (default 512)");
    train_args.tau_init = tr->add_option("--tau-init", train_args.model.tau_init,
                                         "Initial temperature (default 1/ln(1/0.07))");
    tr->add_flag("--tau-fixed", train_args.tau_fixed, "Freeze the temperature parameter");
    tr->callback([&]() { run_train(train_args); });

    // index / retrieve
    IndexArgs index_args;
    auto* ix = app.add_subcommand("index", "Project audio vectors into a persisted index");
    ix->add_option("--checkpoint", index_args.checkpoint, "Model checkpoint")->required();
    ix->add_option("--manifest", index_args.manifest, "Manifest with audio_vec_ref")->required();
    ix->add_option("--audio-vecs", index_args.audio_vecs, "Audio encoder vectors")->required();
    ix->add_option("--out-prefix", index_args.out_prefix, "Writes <prefix>.cnvec and <prefix>.ids")
        ->required();
    ix->callback([&]() { run_index(index_args); });

    RetrieveArgs retrieve_args;
    auto* rt = app.add_subcommand("retrieve", "Top-k speech retrieval for description vectors");
    rt->add_option("--checkpoint", retrieve_args.checkpoint, "Model checkpoint")->required();
    rt->add_option("--index-prefix", retrieve_args.index_prefix, "Prefix from `index`")->required();
    rt->add_option("--query-vec", retrieve_args.query_vecs, "Text encoder query vectors")->required();
    rt->add_option("--top-k", retrieve_args.top_k, "Results per query (default 10)");
    rt->add_option("--out", retrieve_args.out, "Output path (default: stdout)");
    rt->callback([&]() { run_retrieve(retrieve_args); });

    // classify
    ClassifyArgs classify_args;
    auto* cl = app.add_subcommand("classify", "Zero-shot classification with template phrases");
    cl->add_option("--checkpoint", classify_args.checkpoint, "Model checkpoint")->required();
    cl->add_option("--templates", classify_args.templates.templates,
                   "TSV file of label<TAB>phrase lines")->required();
    cl->add_option("--template-vecs", classify_args.templates.template_vecs,
                   "Text encoder vectors aligned with template lines")->required();
    cl->add_option("--audio-vecs", classify_args.audio_vecs, "Audio encoder vectors")->required();
    cl->add_option("--out", classify_args.out, "Output path (default: stdout)");
    cl->callback([&]() { run_classify(classify_args); });

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluation protocols");
    eval->require_subcommand(1);

    EvalGenderArgs eg_args;
    auto* eg = eval->add_subcommand("gender-at-10", "Gender identification in the top retrievals");
    eg->add_option("--checkpoint", eg_args.checkpoint, "Model checkpoint")->required();
    eg->add_option("--index-manifest", eg_args.index_manifest,
                   "Manifest of target segments (audio_vec_ref + gender_label)")->required();
    eg->add_option("--audio-vecs", eg_args.audio_vecs, "Audio encoder vectors")->required();
    eg->add_option("--query-manifest", eg_args.query_manifest,
                   "Manifest of queries (text_vec_ref + gender_label)")->required();
    eg->add_option("--text-vecs", eg_args.text_vecs, "Text encoder vectors")->required();
    eg->add_option("--k", eg_args.k, "Retrieval depth (default 10)");
    eg->add_option("--out", eg_args.out, "Output path (default: stdout)");
    eg->callback([&]() { run_eval_gender(eg_args); });

    EvalZeroShotArgs ez_args;
    auto* ez = eval->add_subcommand("zero-shot", "Zero-shot classification accuracy");
    ez->add_option("--checkpoint", ez_args.checkpoint, "Model checkpoint")->required();
    ez->add_option("--manifest", ez_args.manifest, "Manifest with audio_vec_ref and truth")->required();
    ez->add_option("--audio-vecs", ez_args.audio_vecs, "Audio encoder vectors")->required();
    ez->add_option("--templates", ez_args.templates.templates, "TSV label<TAB>phrase")->required();
    ez->add_option("--template-vecs", ez_args.templates.template_vecs,
                   "Text encoder vectors aligned with template lines")->required();
    ez->add_option("--truth-csv", ez_args.truth_csv, "id,label truth (default: gender_label)");
    ez->add_option("--out", ez_args.out, "Output path (default: stdout)");
    ez->callback([&]() { run_eval_zero_shot(ez_args); });

    // report
    auto* report = app.add_subcommand("report", "Corpus reports");
    report->require_subcommand(1);

    HistogramArgs hist_args;
    auto* rh = report->add_subcommand("histograms", "Value-count CSVs for nisqa_mos and mlm_score");
    rh->add_option("--manifest", hist_args.manifest, "Input manifest")->required();
    rh->add_option("--out-dir", hist_args.out_dir, "Output directory")->required();
    rh->add_option("--bin-width", hist_args.bin_width, "Histogram bin width (default 0.1)");
    rh->callback([&]() { run_report_histograms(hist_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: usage: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.category() << ": " << e.what() << "\n";
        switch (e.kind()) {
        case ErrorKind::usage: return 2;
        case ErrorKind::validation: return 3;
        case ErrorKind::runtime: return 1;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: runtime: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace vcs
