#include "idcr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "idcr/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace idcr {

namespace {
constexpr char kMagic[4] = {'I', 'D', 'C', 'R'};

void put_u32(std::string& out, uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

void put_u64(std::string& out, uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.append(b, 8);
}
} // namespace

const Tensor* Container::find(const std::string& name) const {
    for (const auto& nt : tensors)
        if (nt.name == name) return &nt.t;
    return nullptr;
}

const Tensor& Container::at(const std::string& name) const {
    const Tensor* t = find(name);
    if (!t) throw data_error("container: missing tensor '" + name + "'");
    return *t;
}

void save_container(const std::string& path, const Container& c) {
    nlohmann::json header;
    header["tensors"] = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& nt : c.tensors) {
        nlohmann::json e;
        e["name"] = nt.name;
        e["shape"] = nt.t.shape;
        e["offset"] = offset;
        header["tensors"].push_back(std::move(e));
        offset += static_cast<uint64_t>(nt.t.numel()) * 8;
    }
    if (!c.meta.is_null()) header["meta"] = c.meta;
    std::string hs = header.dump();

    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kContainerVersion);
    put_u64(out, hs.size());
    out += hs;
    for (const auto& nt : c.tensors)
        out.append(reinterpret_cast<const char*>(nt.t.data.data()), nt.t.data.size() * 8);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw data_error("container: cannot open '" + path + "' for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw data_error("container: short write to '" + path + "'");
}

Container load_container(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw data_error("container: cannot open '" + path + "'");
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    if (buf.size() < 16) throw corrupt_error("container: truncated header in '" + path + "'");
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw bad_magic_error("container: bad magic bytes in '" + path + "'");
    uint32_t version;
    std::memcpy(&version, buf.data() + 4, 4);
    if (version != kContainerVersion)
        throw version_error("container: unsupported format version " +
                            std::to_string(version) + " in '" + path + "'");
    uint64_t hlen;
    std::memcpy(&hlen, buf.data() + 8, 8);
    if (16 + hlen > buf.size())
        throw corrupt_error("container: header length exceeds file size in '" + path + "'");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.substr(16, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw corrupt_error("container: unparseable header in '" + path + "': " + e.what());
    }

    const size_t payload_start = 16 + hlen;
    const size_t payload_size = buf.size() - payload_start;

    Container c;
    if (header.contains("meta")) c.meta = header["meta"];
    if (!header.contains("tensors") || !header["tensors"].is_array())
        throw corrupt_error("container: header missing tensor list in '" + path + "'");
    for (const auto& e : header["tensors"]) {
        NamedTensor nt;
        try {
            nt.name = e.at("name").get<std::string>();
            nt.t.shape = e.at("shape").get<std::vector<int>>();
            uint64_t offset = e.at("offset").get<uint64_t>();
            int64_t numel = Tensor::numel_of(nt.t.shape);
            if (offset + static_cast<uint64_t>(numel) * 8 > payload_size)
                throw corrupt_error("container: tensor '" + nt.name +
                                    "' offset out of range in '" + path + "'");
            nt.t.data.resize(static_cast<size_t>(numel));
            std::memcpy(nt.t.data.data(), buf.data() + payload_start + offset,
                        static_cast<size_t>(numel) * 8);
        } catch (const nlohmann::json::exception& ex) {
            throw corrupt_error("container: malformed tensor entry in '" + path +
                                "': " + ex.what());
        }
        c.tensors.push_back(std::move(nt));
    }
    return c;
}

} // namespace idcr
