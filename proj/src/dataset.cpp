#include "idcr/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "idcr/checkpoint.hpp"
#include "idcr/errors.hpp"
#include "idcr/rng.hpp"

namespace idcr {

using nlohmann::json;

Dataset generate_dataset(uint64_t seed, int count, const SceneDims& dims, int ref_size) {
    if (count < 0) throw contract_error("generate_dataset: negative count");
    Dataset ds;
    ds.dims = dims;
    ds.ref_size = ref_size;
    ds.vocab = default_vocabulary();
    Rng pick = rng_stream(seed, 0xd5);
    for (int i = 0; i < count; ++i) {
        int n = 1 + static_cast<int>(pick.uniform_int(3));
        uint64_t sample_seed = hash_mix(seed + 0x9e3779b97f4a7c15ULL * (i + 1));
        ds.samples.push_back(gen_scene(sample_seed, n, dims, ref_size));
    }
    return ds;
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    json man;
    man["version"] = kDatasetVersion;
    man["frames"] = ds.dims.frames;
    man["height"] = ds.dims.height;
    man["width"] = ds.dims.width;
    man["ref_size"] = ds.ref_size;
    man["n_range"] = {1, 3};
    man["vocabulary"] = ds.vocab.symbols;
    man["count"] = ds.samples.size();
    json rows = json::array();
    Container c;
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        const SceneSample& s = ds.samples[i];
        json row;
        row["seed"] = s.seed;
        row["prompt"] = s.prompt_code;
        json specs = json::array();
        for (const SpriteSpec& sp : s.specs)
            specs.push_back({{"shape", static_cast<int>(sp.shape)},
                             {"color", sp.color},
                             {"size", sp.size},
                             {"vx", sp.vx},
                             {"vy", sp.vy},
                             {"x0", sp.x0},
                             {"y0", sp.y0}});
        row["specs"] = std::move(specs);
        rows.push_back(std::move(row));
        std::string p = "s" + std::to_string(i);
        c.tensors.push_back({p + ".video", s.video});
        c.tensors.push_back({p + ".masks", s.masks});
        for (size_t k = 0; k < s.references.size(); ++k)
            c.tensors.push_back({p + ".ref" + std::to_string(k), s.references[k]});
    }
    man["samples"] = std::move(rows);
    c.meta = {{"kind", "dataset"}, {"count", ds.samples.size()}};
    save_container(dir + "/data.idcr", c);
    std::ofstream f(dir + "/manifest.json", std::ios::binary);
    if (!f) throw data_error("write_dataset: cannot open '" + dir + "/manifest.json'");
    f << man.dump(2) << "\n";
    if (!f) throw data_error("write_dataset: short write to manifest");
}

Dataset read_dataset(const std::string& dir) {
    std::ifstream f(dir + "/manifest.json", std::ios::binary);
    if (!f) throw data_error("read_dataset: missing '" + dir + "/manifest.json'");
    json man;
    try {
        f >> man;
    } catch (const json::exception& e) {
        throw corrupt_error(std::string("read_dataset: manifest parse failure: ") + e.what());
    }
    int version = man.value("version", -1);
    if (version != kDatasetVersion)
        throw version_error("read_dataset: manifest version " + std::to_string(version) +
                            ", expected " + std::to_string(kDatasetVersion));
    Dataset ds;
    ds.dims.frames = man.at("frames");
    ds.dims.height = man.at("height");
    ds.dims.width = man.at("width");
    ds.ref_size = man.at("ref_size");
    ds.vocab = Vocabulary::from(man.at("vocabulary").get<std::vector<std::string>>());
    Container c = load_container(dir + "/data.idcr");
    size_t count = man.at("count");
    const json& rows = man.at("samples");
    if (rows.size() != count)
        throw corrupt_error("read_dataset: manifest count " + std::to_string(count) +
                            " does not match sample rows " + std::to_string(rows.size()));
    for (size_t i = 0; i < count; ++i) {
        const json& row = rows[i];
        SceneSample s;
        s.seed = row.at("seed");
        s.prompt_code = row.at("prompt").get<std::vector<std::string>>();
        for (const json& jsp : row.at("specs")) {
            SpriteSpec sp;
            sp.shape = static_cast<SpriteShape>(jsp.at("shape").get<int>());
            sp.color = jsp.at("color");
            sp.size = jsp.at("size");
            sp.vx = jsp.at("vx");
            sp.vy = jsp.at("vy");
            sp.x0 = jsp.at("x0");
            sp.y0 = jsp.at("y0");
            s.specs.push_back(sp);
        }
        std::string p = "s" + std::to_string(i);
        s.video = c.at(p + ".video");
        s.masks = c.at(p + ".masks");
        for (size_t k = 0; k < s.specs.size(); ++k)
            s.references.push_back(c.at(p + ".ref" + std::to_string(k)));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

} // namespace idcr
