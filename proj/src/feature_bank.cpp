#include "cfa/feature_bank.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "cfa/binio.hpp"
#include "cfa/common.hpp"

namespace cfa {

using nlohmann::json;

namespace {

constexpr uint32_t kBankMagic = 0x4b424143;  // "CABK"
constexpr uint32_t kBankVersion = 1;

void check_sigma(double sigma) {
    if (sigma < -1.0 || sigma > 1.0)
        throw InvariantError("sigma must lie in [-1,1], got " + std::to_string(sigma));
}

std::string triplet_key_string(const FeatureBank& bank, const Vocabulary* vocab,
                               const std::tuple<int, int, int>& key) {
    (void)bank;
    auto [s, p, o] = key;
    if (vocab)
        return vocab->entity_classes[static_cast<size_t>(s)] + "|" +
               vocab->predicate_classes[static_cast<size_t>(p)] + "|" +
               vocab->entity_classes[static_cast<size_t>(o)];
    return std::to_string(s) + "|" + std::to_string(p) + "|" + std::to_string(o);
}

}  // namespace

FeatureBank build_bank(const std::vector<Scene>& scenes, const Vocabulary& vocab,
                       const std::set<int>& tail_set, Execution exec) {
    FeatureBank bank;
    bank.tail_set = tail_set;

    std::vector<std::vector<BankEntry>> partial(scenes.size());
    std::vector<std::string> missing(scenes.size());
    parallel_for(scenes.size(), exec, [&](size_t si) {
        const Scene& scene = scenes[si];
        for (const auto& rel : scene.relations) {
            if (!tail_set.count(rel.predicate_id)) continue;
            const Entity& sub = scene.entities[static_cast<size_t>(rel.sub_idx)];
            const Entity& obj = scene.entities[static_cast<size_t>(rel.obj_idx)];
            if (sub.feature.empty() || obj.feature.empty() || rel.union_feature.empty()) {
                missing[si] = scene.image_id;
                return;
            }
            BankEntry e;
            e.sub_class = sub.class_id;
            e.obj_class = obj.class_id;
            e.predicate_id = rel.predicate_id;
            e.v_s = sub.feature;
            e.v_o = obj.feature;
            e.u = rel.union_feature;
            e.p_vec = scene.pair_spatial(rel.sub_idx, rel.obj_idx);
            e.image_id = scene.image_id;
            partial[si].push_back(std::move(e));
        }
    });

    std::string offenders;
    for (const auto& id : missing)
        if (!id.empty()) offenders += (offenders.empty() ? "" : ", ") + id;
    if (!offenders.empty())
        throw InvariantError("build_bank: scenes missing feature vectors: " + offenders);

    for (auto& part : partial)
        for (auto& e : part) bank.entries.push_back(std::move(e));

    for (size_t idx = 0; idx < bank.entries.size(); ++idx) {
        const auto& e = bank.entries[idx];
        if (bank.dim == 0) bank.dim = static_cast<int>(e.v_s.size());
        bank.by_triplet[{e.sub_class, e.predicate_id, e.obj_class}].push_back(static_cast<int>(idx));
        bank.by_pair[{e.sub_class, e.obj_class}].push_back(static_cast<int>(idx));
    }
    (void)vocab;
    return bank;
}

std::vector<int> query_by_triplet(const FeatureBank& bank, const std::tuple<int, int, int>& key,
                                  const Vec2& p_query, double sigma) {
    check_sigma(sigma);
    std::vector<int> out;
    auto it = bank.by_triplet.find(key);
    if (it == bank.by_triplet.end()) return out;
    for (int id : it->second)
        if (spatial_match(p_query, bank.entries[static_cast<size_t>(id)].p_vec, sigma)) out.push_back(id);
    return out;
}

std::vector<int> query_by_pair(const FeatureBank& bank, const std::pair<int, int>& pair,
                               const Vec2& p_query, double sigma) {
    check_sigma(sigma);
    std::vector<int> out;
    auto it = bank.by_pair.find(pair);
    if (it == bank.by_pair.end()) return out;
    for (int id : it->second)
        if (spatial_match(p_query, bank.entries[static_cast<size_t>(id)].p_vec, sigma)) out.push_back(id);
    return out;
}

void save_bank(const FeatureBank& bank, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    // Image ids go to a manifest table; records stay fixed-width.
    std::vector<std::string> image_ids;
    std::map<std::string, int> image_index;
    for (const auto& e : bank.entries) {
        if (!image_index.count(e.image_id)) {
            image_index[e.image_id] = static_cast<int>(image_ids.size());
            image_ids.push_back(e.image_id);
        }
    }

    std::string bin;
    put_u32(bin, kBankMagic);
    put_u32(bin, kBankVersion);
    put_u32(bin, static_cast<uint32_t>(bank.dim));
    put_u64(bin, bank.entries.size());
    for (const auto& e : bank.entries) {
        put_u32(bin, static_cast<uint32_t>(e.sub_class));
        put_u32(bin, static_cast<uint32_t>(e.obj_class));
        put_u32(bin, static_cast<uint32_t>(e.predicate_id));
        put_u32(bin, static_cast<uint32_t>(image_index.at(e.image_id)));
        // Spatial vectors are derived box geometry, stored at full precision
        // so load(save(bank)) reproduces the bank exactly.
        put_f64(bin, e.p_vec[0]);
        put_f64(bin, e.p_vec[1]);
        for (const auto* vec : {&e.v_s, &e.v_o, &e.u}) {
            if (static_cast<int>(vec->size()) != bank.dim && !(bank.entries.empty()))
                throw InvariantError("save_bank: entry vector dimension mismatch");
            for (double x : *vec) put_f32(bin, static_cast<float>(x));
        }
    }
    write_file_bytes(dir / "bank.bin", bin);

    json manifest;
    manifest["version"] = kBankVersion;
    manifest["dim"] = bank.dim;
    manifest["count"] = bank.entries.size();
    manifest["tail_set"] = std::vector<int>(bank.tail_set.begin(), bank.tail_set.end());
    manifest["image_ids"] = image_ids;
    json counts = json::object();
    for (const auto& [key, ids] : bank.by_triplet)
        counts[triplet_key_string(bank, nullptr, key)] = ids.size();
    manifest["triplet_counts"] = std::move(counts);
    write_text_file(dir / "bank.json", manifest.dump(2) + "\n");
}

FeatureBank load_bank(const std::filesystem::path& dir) {
    auto bin_path = dir / "bank.bin";
    auto json_path = dir / "bank.json";
    if (!std::filesystem::exists(bin_path)) throw MissingInputError("missing " + bin_path.string());
    if (!std::filesystem::exists(json_path)) throw MissingInputError("missing " + json_path.string());

    json manifest = json::parse(read_file_bytes(json_path), nullptr, false);
    if (manifest.is_discarded()) throw DataFormatError(json_path.string() + ": invalid JSON");
    if (manifest.at("version").get<uint32_t>() != kBankVersion)
        throw DataFormatError(json_path.string() + ": unsupported bank version");
    std::vector<std::string> image_ids = manifest.at("image_ids").get<std::vector<std::string>>();

    BinReader reader(read_file_bytes(bin_path), bin_path.string());
    if (reader.u32() != kBankMagic) throw DataFormatError(bin_path.string() + ": bad magic");
    if (reader.u32() != kBankVersion) throw DataFormatError(bin_path.string() + ": unsupported version");
    FeatureBank bank;
    bank.dim = static_cast<int>(reader.u32());
    uint64_t count = reader.u64();
    if (bank.dim != manifest.at("dim").get<int>() || count != manifest.at("count").get<uint64_t>())
        throw DataFormatError(json_path.string() + ": manifest does not match bank.bin header");
    for (int p : manifest.at("tail_set")) bank.tail_set.insert(p);

    const size_t dim = static_cast<size_t>(bank.dim);
    bank.entries.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        BankEntry& e = bank.entries[i];
        e.sub_class = static_cast<int>(reader.u32());
        e.obj_class = static_cast<int>(reader.u32());
        e.predicate_id = static_cast<int>(reader.u32());
        uint32_t img = reader.u32();
        if (img >= image_ids.size())
            throw DataFormatError(bin_path.string() + ": image id index out of range");
        e.image_id = image_ids[img];
        e.p_vec[0] = reader.f64();
        e.p_vec[1] = reader.f64();
        for (auto* vec : {&e.v_s, &e.v_o, &e.u}) {
            vec->resize(dim);
            for (auto& x : *vec) x = static_cast<double>(reader.f32());
        }
        bank.by_triplet[{e.sub_class, e.predicate_id, e.obj_class}].push_back(static_cast<int>(i));
        bank.by_pair[{e.sub_class, e.obj_class}].push_back(static_cast<int>(i));
    }
    if (!reader.at_end()) throw DataFormatError(bin_path.string() + ": trailing bytes");
    return bank;
}

}  // namespace cfa
