#include "cfa/dataset.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "cfa/binio.hpp"
#include "cfa/common.hpp"

namespace cfa {

using nlohmann::json;

void Vocabulary::validate() const {
    if (predicate_classes.empty())
        throw DataFormatError("vocab: predicate_classes must contain the no-relation class at index 0");
    std::set<std::string> seen;
    for (const auto& n : entity_classes)
        if (!seen.insert(n).second) throw DataFormatError("vocab: duplicate entity class name '" + n + "'");
    seen.clear();
    for (const auto& n : predicate_classes)
        if (!seen.insert(n).second) throw DataFormatError("vocab: duplicate predicate name '" + n + "'");
}

void Vocabulary::set_groups(std::set<int> head, std::set<int> body, std::set<int> tail) {
    size_t total = head.size() + body.size() + tail.size();
    if (total != static_cast<size_t>(n_predicates()))
        throw InvariantError("frequency groups do not cover all annotated predicates");
    for (const auto* s : {&head, &body, &tail}) {
        for (int p : *s) {
            if (p < 1 || p > n_predicates())
                throw InvariantError("frequency group contains invalid predicate index " + std::to_string(p));
            if ((head.count(p) + body.count(p) + tail.count(p)) != 1)
                throw InvariantError("frequency groups overlap at predicate " + std::to_string(p));
        }
    }
    head_set = std::move(head);
    body_set = std::move(body);
    tail_set = std::move(tail);
}

std::vector<double> union_surrogate(const Scene& scene, int sub_idx, int obj_idx) {
    const auto& a = scene.entities[static_cast<size_t>(sub_idx)].feature;
    const auto& b = scene.entities[static_cast<size_t>(obj_idx)].feature;
    std::vector<double> out(a.size());
    for (size_t d = 0; d < a.size(); ++d) out[d] = 0.5 * (a[d] + b[d]);
    return out;
}

namespace {

json parse_json_file(const std::filesystem::path& path) {
    std::string text = read_file_bytes(path);
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw DataFormatError(path.string() + ": invalid JSON");
    return j;
}

std::string loc(const std::filesystem::path& file, size_t line) {
    return file.filename().string() + ":" + std::to_string(line);
}

void check_box(const BBox& b, double w, double h, const std::string& where) {
    if (!(b.x1 < b.x2))
        throw DataFormatError(where + ": bbox violates x1 < x2 (" + std::to_string(b.x1) + " >= " +
                              std::to_string(b.x2) + ")");
    if (!(b.y1 < b.y2))
        throw DataFormatError(where + ": bbox violates y1 < y2 (" + std::to_string(b.y1) + " >= " +
                              std::to_string(b.y2) + ")");
    if (b.x1 < 0 || b.y1 < 0 || b.x2 > w || b.y2 > h)
        throw DataFormatError(where + ": bbox outside image bounds");
}

struct FeatureManifestScene {
    std::string image_id;
    size_t n_entities = 0;
    size_t n_relations = 0;
    uint64_t offset_bytes = 0;
};

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw MissingInputError("dataset directory not found: " + dir.string());

    Dataset ds;

    // vocab.json
    auto vocab_path = dir / "vocab.json";
    if (!std::filesystem::exists(vocab_path))
        throw MissingInputError("missing " + vocab_path.string());
    json jv = parse_json_file(vocab_path);
    if (!jv.contains("entity_classes") || !jv.contains("predicate_classes"))
        throw DataFormatError(vocab_path.string() + ": needs entity_classes and predicate_classes");
    ds.vocab.entity_classes = jv.at("entity_classes").get<std::vector<std::string>>();
    ds.vocab.predicate_classes = jv.at("predicate_classes").get<std::vector<std::string>>();
    ds.vocab.validate();

    // scenes.jsonl
    auto scenes_path = dir / "scenes.jsonl";
    if (!std::filesystem::exists(scenes_path))
        throw MissingInputError("missing " + scenes_path.string());
    std::ifstream in(scenes_path);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json js = json::parse(line, nullptr, false);
        if (js.is_discarded())
            throw DataFormatError(loc(scenes_path, line_no) + ": invalid JSON record");
        Scene scene;
        try {
            scene.image_id = js.at("image_id").get<std::string>();
            scene.width = js.at("width").get<double>();
            scene.height = js.at("height").get<double>();
        } catch (const json::exception& e) {
            throw DataFormatError(loc(scenes_path, line_no) + ": bad scene header: " + e.what());
        }
        if (scene.width <= 0 || scene.height <= 0)
            throw DataFormatError(loc(scenes_path, line_no) + ": field width/height must be positive");

        for (const auto& je : js.value("entities", json::array())) {
            Entity ent;
            try {
                ent.class_id = je.at("class").get<int>();
                auto bb = je.at("bbox");
                ent.box = {bb.at(0).get<double>(), bb.at(1).get<double>(), bb.at(2).get<double>(),
                           bb.at(3).get<double>()};
            } catch (const json::exception& e) {
                throw DataFormatError(loc(scenes_path, line_no) + ": bad entity record: " + e.what());
            }
            if (ent.class_id < 0 || ent.class_id >= ds.vocab.n_entity_classes())
                throw DataFormatError(loc(scenes_path, line_no) + ": field class out of range: " +
                                      std::to_string(ent.class_id));
            check_box(ent.box, scene.width, scene.height, loc(scenes_path, line_no));
            scene.entities.push_back(std::move(ent));
        }

        std::set<std::pair<int, int>> seen_pairs;
        for (const auto& jr : js.value("relations", json::array())) {
            Relation rel;
            try {
                rel.sub_idx = jr.at("sub").get<int>();
                rel.obj_idx = jr.at("obj").get<int>();
                rel.predicate_id = jr.at("predicate").get<int>();
            } catch (const json::exception& e) {
                throw DataFormatError(loc(scenes_path, line_no) + ": bad relation record: " + e.what());
            }
            int n = static_cast<int>(scene.entities.size());
            if (rel.sub_idx < 0 || rel.sub_idx >= n || rel.obj_idx < 0 || rel.obj_idx >= n)
                throw DataFormatError(loc(scenes_path, line_no) + ": field sub/obj out of range");
            if (rel.sub_idx == rel.obj_idx)
                throw DataFormatError(loc(scenes_path, line_no) + ": field sub equals obj");
            if (rel.predicate_id < 1 || rel.predicate_id > ds.vocab.n_predicates())
                throw DataFormatError(loc(scenes_path, line_no) + ": field predicate out of range: " +
                                      std::to_string(rel.predicate_id));
            if (!seen_pairs.insert({rel.sub_idx, rel.obj_idx}).second)
                throw DataFormatError(loc(scenes_path, line_no) + ": duplicate annotated pair (" +
                                      std::to_string(rel.sub_idx) + "," + std::to_string(rel.obj_idx) + ")");
            scene.relations.push_back(std::move(rel));
        }
        ds.scenes.push_back(std::move(scene));
    }

    // features.bin + features.json (optional as a pair)
    auto feat_bin = dir / "features.bin";
    auto feat_json = dir / "features.json";
    bool have_bin = std::filesystem::exists(feat_bin);
    bool have_manifest = std::filesystem::exists(feat_json);
    if (have_bin != have_manifest)
        throw DataFormatError("features.bin and features.json must both be present or both absent in " +
                              dir.string());
    if (have_bin) {
        json jm = parse_json_file(feat_json);
        ds.feature_dim = jm.at("dim").get<int>();
        if (ds.feature_dim <= 0) throw DataFormatError(feat_json.string() + ": field dim must be positive");
        std::vector<FeatureManifestScene> manifest;
        for (const auto& js : jm.at("scenes")) {
            FeatureManifestScene m;
            m.image_id = js.at("image_id").get<std::string>();
            m.n_entities = js.at("n_entities").get<size_t>();
            m.n_relations = js.at("n_relations").get<size_t>();
            m.offset_bytes = js.at("offset_bytes").get<uint64_t>();
            manifest.push_back(std::move(m));
        }
        if (manifest.size() != ds.scenes.size())
            throw DataFormatError(feat_json.string() + ": scene count " + std::to_string(manifest.size()) +
                                  " does not match scenes.jsonl (" + std::to_string(ds.scenes.size()) + ")");

        BinReader reader(read_file_bytes(feat_bin), feat_bin.string());
        const size_t dim = static_cast<size_t>(ds.feature_dim);
        uint64_t expect_offset = 0;
        for (size_t si = 0; si < ds.scenes.size(); ++si) {
            Scene& scene = ds.scenes[si];
            const auto& m = manifest[si];
            if (m.image_id != scene.image_id)
                throw DataFormatError(feat_json.string() + ": scene " + std::to_string(si) +
                                      " image_id mismatch (" + m.image_id + " vs " + scene.image_id + ")");
            if (m.n_entities != scene.entities.size() || m.n_relations != scene.relations.size())
                throw DataFormatError(feat_json.string() + ": scene " + scene.image_id +
                                      " entity/relation counts do not match scenes.jsonl");
            if (m.offset_bytes != expect_offset)
                throw DataFormatError(feat_json.string() + ": scene " + scene.image_id +
                                      " offset mismatch");
            for (auto& ent : scene.entities) {
                ent.feature.resize(dim);
                for (size_t d = 0; d < dim; ++d) ent.feature[d] = static_cast<double>(reader.f32());
            }
            for (auto& rel : scene.relations) {
                rel.union_feature.resize(dim);
                for (size_t d = 0; d < dim; ++d) rel.union_feature[d] = static_cast<double>(reader.f32());
            }
            expect_offset += 4ull * dim * (m.n_entities + m.n_relations);
        }
        if (!reader.at_end())
            throw DataFormatError(feat_bin.string() + ": trailing bytes (" +
                                  std::to_string(reader.remaining()) + ")");
        ds.has_features = true;
    }

    // embeddings.bin + embeddings.json (optional as a pair)
    auto emb_bin = dir / "embeddings.bin";
    auto emb_json = dir / "embeddings.json";
    bool have_emb = std::filesystem::exists(emb_bin);
    if (have_emb != std::filesystem::exists(emb_json))
        throw DataFormatError("embeddings.bin and embeddings.json must both be present or both absent in " +
                              dir.string());
    if (have_emb) {
        json jm = parse_json_file(emb_json);
        ds.embedding_dim = jm.at("dim").get<int>();
        int count = jm.at("count").get<int>();
        if (count != ds.vocab.n_entity_classes())
            throw DataFormatError(emb_json.string() + ": count " + std::to_string(count) +
                                  " does not match entity class count");
        BinReader reader(read_file_bytes(emb_bin), emb_bin.string());
        ds.embeddings.resize(static_cast<size_t>(count));
        for (auto& vec : ds.embeddings) {
            vec.resize(static_cast<size_t>(ds.embedding_dim));
            for (auto& x : vec) x = static_cast<double>(reader.f32());
        }
        if (!reader.at_end())
            throw DataFormatError(emb_bin.string() + ": trailing bytes");
    }

    return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);

    json jv;
    jv["entity_classes"] = dataset.vocab.entity_classes;
    jv["predicate_classes"] = dataset.vocab.predicate_classes;
    write_text_file(dir / "vocab.json", jv.dump(2) + "\n");

    std::ostringstream lines;
    for (const auto& scene : dataset.scenes) {
        json js;
        js["image_id"] = scene.image_id;
        js["width"] = scene.width;
        js["height"] = scene.height;
        json ents = json::array();
        for (const auto& e : scene.entities)
            ents.push_back({{"class", e.class_id}, {"bbox", {e.box.x1, e.box.y1, e.box.x2, e.box.y2}}});
        js["entities"] = std::move(ents);
        json rels = json::array();
        for (const auto& r : scene.relations)
            rels.push_back({{"sub", r.sub_idx}, {"obj", r.obj_idx}, {"predicate", r.predicate_id}});
        js["relations"] = std::move(rels);
        lines << js.dump() << "\n";
    }
    write_text_file(dir / "scenes.jsonl", lines.str());

    if (dataset.has_features) {
        std::string bin;
        json manifest;
        manifest["dim"] = dataset.feature_dim;
        json jscenes = json::array();
        uint64_t offset = 0;
        for (const auto& scene : dataset.scenes) {
            jscenes.push_back({{"image_id", scene.image_id},
                               {"n_entities", scene.entities.size()},
                               {"n_relations", scene.relations.size()},
                               {"offset_bytes", offset}});
            for (const auto& e : scene.entities)
                for (double x : e.feature) put_f32(bin, static_cast<float>(x));
            for (const auto& r : scene.relations)
                for (double x : r.union_feature) put_f32(bin, static_cast<float>(x));
            offset += 4ull * static_cast<uint64_t>(dataset.feature_dim) *
                      (scene.entities.size() + scene.relations.size());
        }
        manifest["scenes"] = std::move(jscenes);
        write_file_bytes(dir / "features.bin", bin);
        write_text_file(dir / "features.json", manifest.dump(2) + "\n");
    }

    if (!dataset.embeddings.empty()) {
        std::string bin;
        for (const auto& vec : dataset.embeddings)
            for (double x : vec) put_f32(bin, static_cast<float>(x));
        json manifest;
        manifest["dim"] = dataset.embedding_dim;
        manifest["count"] = dataset.embeddings.size();
        write_file_bytes(dir / "embeddings.bin", bin);
        write_text_file(dir / "embeddings.json", manifest.dump(2) + "\n");
    }
}

}  // namespace cfa
