#include "vcs/manifest.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "vcs/error.hpp"
#include "vcs/io_util.hpp"

namespace vcs {

using ordered_json = nlohmann::ordered_json;

const char* to_string(GenderLabel g) {
    switch (g) {
    case GenderLabel::male: return "male";
    case GenderLabel::female: return "female";
    case GenderLabel::nonbinary: return "nonbinary";
    case GenderLabel::not_indicated: return "not_indicated";
    }
    return "not_indicated";
}

std::optional<GenderLabel> gender_from_string(const std::string& s) {
    if (s == "male") return GenderLabel::male;
    if (s == "female") return GenderLabel::female;
    if (s == "nonbinary") return GenderLabel::nonbinary;
    if (s == "not_indicated") return GenderLabel::not_indicated;
    return std::nullopt;
}

namespace {

[[noreturn]] void schema_error(size_t line_no, const std::string& what) {
    throw Error::validation("schema violation at line " + std::to_string(line_no) + ": " + what);
}

ordered_json ref_to_json(const VecRef& ref) {
    return ordered_json{{"store", ref.store}, {"row", ref.row}};
}

VecRef ref_from_json(const ordered_json& j, const char* field, size_t line_no) {
    if (!j.is_object() || !j.contains("store") || !j.contains("row"))
        schema_error(line_no, std::string(field) + " must be an object with store and row");
    if (!j["store"].is_string()) schema_error(line_no, std::string(field) + ".store must be a string");
    if (!j["row"].is_number_unsigned())
        schema_error(line_no, std::string(field) + ".row must be a non-negative integer");
    VecRef ref;
    ref.store = j["store"].get<std::string>();
    ref.row = j["row"].get<uint32_t>();
    return ref;
}

double require_number(const ordered_json& j, const char* field, size_t line_no) {
    if (!j.is_number()) schema_error(line_no, std::string(field) + " must be a number");
    return j.get<double>();
}

std::string require_string(const ordered_json& j, const char* field, size_t line_no) {
    if (!j.is_string()) schema_error(line_no, std::string(field) + " must be a string");
    return j.get<std::string>();
}

}  // namespace

std::string record_to_line(const SegmentRecord& r) {
    ordered_json j;
    j["id"] = r.id;
    j["channel_id"] = r.channel_id;
    j["duration_s"] = r.duration_s;
    if (r.volume_dbfs) j["volume_dbfs"] = *r.volume_dbfs;
    if (r.nisqa_mos) j["nisqa_mos"] = *r.nisqa_mos;
    if (r.mlm_score) j["mlm_score"] = *r.mlm_score;
    j["transcription"] = r.transcription;
    if (r.description) j["description"] = *r.description;
    if (r.mora_count) j["mora_count"] = *r.mora_count;
    if (r.gender_label) j["gender_label"] = to_string(*r.gender_label);
    if (r.audio_vec_ref) j["audio_vec_ref"] = ref_to_json(*r.audio_vec_ref);
    if (r.text_vec_ref) j["text_vec_ref"] = ref_to_json(*r.text_vec_ref);
    if (r.xvector_ref) j["xvector_ref"] = ref_to_json(*r.xvector_ref);
    if (r.wav_ref) j["wav_ref"] = *r.wav_ref;
    if (r.f0_mean_hz) j["f0_mean_hz"] = *r.f0_mean_hz;
    if (r.energy_std) j["energy_std"] = *r.energy_std;
    if (r.speaking_rate) j["speaking_rate"] = *r.speaking_rate;
    return j.dump();
}

SegmentRecord record_from_line(const std::string& line, size_t line_no) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded())
        throw Error::validation("parse error at line " + std::to_string(line_no) +
                                ": invalid JSON");
    if (!j.is_object()) schema_error(line_no, "record must be a JSON object");

    SegmentRecord r;
    if (!j.contains("id")) schema_error(line_no, "missing required field id");
    r.id = require_string(j["id"], "id", line_no);
    if (r.id.empty()) schema_error(line_no, "id must be non-empty");
    if (!j.contains("channel_id")) schema_error(line_no, "missing required field channel_id");
    r.channel_id = require_string(j["channel_id"], "channel_id", line_no);
    if (!j.contains("duration_s")) schema_error(line_no, "missing required field duration_s");
    r.duration_s = require_number(j["duration_s"], "duration_s", line_no);
    if (!(r.duration_s > 0.0)) schema_error(line_no, "duration_s must be > 0");
    if (!j.contains("transcription")) schema_error(line_no, "missing required field transcription");
    r.transcription = require_string(j["transcription"], "transcription", line_no);

    if (j.contains("volume_dbfs")) r.volume_dbfs = require_number(j["volume_dbfs"], "volume_dbfs", line_no);
    if (j.contains("nisqa_mos")) {
        const double mos = require_number(j["nisqa_mos"], "nisqa_mos", line_no);
        if (mos < 1.0 || mos > 5.0) schema_error(line_no, "nisqa_mos must be in [1, 5]");
        r.nisqa_mos = mos;
    }
    if (j.contains("mlm_score")) r.mlm_score = require_number(j["mlm_score"], "mlm_score", line_no);
    if (j.contains("description")) r.description = require_string(j["description"], "description", line_no);
    if (j.contains("mora_count")) {
        if (!j["mora_count"].is_number_integer()) schema_error(line_no, "mora_count must be an integer");
        const int64_t m = j["mora_count"].get<int64_t>();
        if (m < 0) schema_error(line_no, "mora_count must be >= 0");
        r.mora_count = m;
    }
    if (j.contains("gender_label")) {
        const std::string g = require_string(j["gender_label"], "gender_label", line_no);
        const auto parsed = gender_from_string(g);
        if (!parsed) schema_error(line_no, "gender_label must be one of male/female/nonbinary/not_indicated");
        r.gender_label = *parsed;
    }
    if (j.contains("audio_vec_ref")) r.audio_vec_ref = ref_from_json(j["audio_vec_ref"], "audio_vec_ref", line_no);
    if (j.contains("text_vec_ref")) r.text_vec_ref = ref_from_json(j["text_vec_ref"], "text_vec_ref", line_no);
    if (j.contains("xvector_ref")) r.xvector_ref = ref_from_json(j["xvector_ref"], "xvector_ref", line_no);
    if (j.contains("wav_ref")) r.wav_ref = require_string(j["wav_ref"], "wav_ref", line_no);
    if (j.contains("f0_mean_hz")) r.f0_mean_hz = require_number(j["f0_mean_hz"], "f0_mean_hz", line_no);
    if (j.contains("energy_std")) r.energy_std = require_number(j["energy_std"], "energy_std", line_no);
    if (j.contains("speaking_rate")) r.speaking_rate = require_number(j["speaking_rate"], "speaking_rate", line_no);
    return r;
}

std::vector<SegmentRecord> load_manifest(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    std::vector<SegmentRecord> records;
    std::unordered_set<std::string> seen;
    std::istringstream in(bytes);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        SegmentRecord r = record_from_line(line, line_no);
        if (!seen.insert(r.id).second)
            throw Error::validation("duplicate id at line " + std::to_string(line_no) + ": " + r.id);
        records.push_back(std::move(r));
    }
    return records;
}

void save_manifest(const std::vector<SegmentRecord>& records, const std::filesystem::path& path) {
    std::string out;
    for (const auto& r : records) {
        out += record_to_line(r);
        out += '\n';
    }
    atomic_write_file(path, out);
}

DatasetSplit load_split(const std::filesystem::path& path) {
    ordered_json j = ordered_json::parse(read_file_bytes(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error::validation("invalid split file: " + path.string());
    DatasetSplit split;
    for (const auto& [name, target] :
         {std::pair<const char*, std::vector<std::string>*>{"train", &split.train},
          {"valid", &split.valid},
          {"test", &split.test}}) {
        if (!j.contains(name) || !j[name].is_array())
            throw Error::validation(std::string("split file missing array field ") + name);
        for (const auto& v : j[name]) {
            if (!v.is_string()) throw Error::validation("split ids must be strings");
            target->push_back(v.get<std::string>());
        }
    }
    return split;
}

void save_split(const DatasetSplit& split, const std::filesystem::path& path) {
    ordered_json j;
    j["train"] = split.train;
    j["valid"] = split.valid;
    j["test"] = split.test;
    atomic_write_file(path, j.dump(2) + "\n");
}

void validate_refs(const std::vector<SegmentRecord>& records,
                   const std::map<std::string, const VectorStore*>& stores) {
    auto check = [&](const std::optional<VecRef>& ref, const std::string& id, const char* field) {
        if (!ref) return;
        auto it = stores.find(ref->store);
        if (it == stores.end())
            throw Error::validation("record " + id + ": " + field + " names unknown store '" +
                                    ref->store + "'");
        if (ref->row >= it->second->count())
            throw Error::validation("record " + id + ": " + field + " row " +
                                    std::to_string(ref->row) + " out of range (store has " +
                                    std::to_string(it->second->count()) + " rows)");
    };
    for (const auto& r : records) {
        check(r.audio_vec_ref, r.id, "audio_vec_ref");
        check(r.text_vec_ref, r.id, "text_vec_ref");
        check(r.xvector_ref, r.id, "xvector_ref");
    }
}

void validate_split(const DatasetSplit& split, const std::vector<SegmentRecord>& records) {
    std::unordered_map<std::string, const SegmentRecord*> by_id;
    for (const auto& r : records) by_id[r.id] = &r;

    std::unordered_set<std::string> seen;
    std::set<std::string> channels[3];
    const std::vector<std::string>* parts[3] = {&split.train, &split.valid, &split.test};
    const char* names[3] = {"train", "valid", "test"};
    for (int p = 0; p < 3; ++p) {
        for (const auto& id : *parts[p]) {
            if (!seen.insert(id).second)
                throw Error::validation("split: id appears in more than one part: " + id);
            auto it = by_id.find(id);
            if (it == by_id.end())
                throw Error::validation(std::string("split: ") + names[p] +
                                        " id not in manifest: " + id);
            channels[p].insert(it->second->channel_id);
        }
    }
    for (int a = 0; a < 3; ++a) {
        for (int b = a + 1; b < 3; ++b) {
            for (const auto& ch : channels[a]) {
                if (channels[b].count(ch))
                    throw Error::validation(std::string("split: channel '") + ch +
                                            "' appears in both " + names[a] + " and " + names[b]);
            }
        }
    }
}

}  // namespace vcs
