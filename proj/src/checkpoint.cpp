#include "ssg/checkpoint.hpp"

#include "ssg/util.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <stdexcept>

namespace ssg {

using nlohmann::json;

std::string checkpoint_blob_path(const std::string& manifest_path) {
    const auto dot = manifest_path.rfind('.');
    const std::string stem = dot == std::string::npos ? manifest_path : manifest_path.substr(0, dot);
    return stem + ".bin";
}

void save_checkpoint(const std::string& manifest_path, const ParameterStore& store) {
    std::string blob;
    json tensors = json::array();
    for (const auto& [name, e] : store.entries()) {
        json t;
        t["name"] = name;
        t["shape"] = e.value.shape;
        t["dtype"] = "f32";
        t["offset"] = blob.size();
        tensors.push_back(std::move(t));
        for (double v : e.value.data) {
            const float f = static_cast<float>(v);
            char buf[4];
            std::memcpy(buf, &f, 4); // little-endian host assumed; asserted below
            blob.append(buf, 4);
        }
    }
    static_assert(std::endian::native == std::endian::little, "checkpoint blob is little-endian");
    const std::string blob_path = checkpoint_blob_path(manifest_path);
    json manifest;
    manifest["format"] = "ssg-ckpt-v1";
    manifest["blob"] = blob_path.substr(blob_path.find_last_of('/') + 1);
    manifest["tensors"] = std::move(tensors);
    write_file(manifest_path, manifest.dump(2) + "\n");
    write_file(blob_path, blob);
}

ParameterStore load_checkpoint(const std::string& manifest_path) {
    const json manifest = json::parse(read_file(manifest_path));
    if (manifest.at("format").get<std::string>() != "ssg-ckpt-v1")
        throw std::runtime_error("unknown checkpoint format in " + manifest_path);
    const std::string blob = read_file(checkpoint_blob_path(manifest_path));
    ParameterStore store;
    for (const auto& t : manifest.at("tensors")) {
        const std::string name = t.at("name").get<std::string>();
        Shape shape = t.at("shape").get<std::vector<int>>();
        const std::size_t offset = t.at("offset").get<std::size_t>();
        const std::size_t count = shape_numel(shape);
        if (offset + count * 4 > blob.size()) throw std::runtime_error("checkpoint blob too short for " + name);
        Tensor v(shape);
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, blob.data() + offset + i * 4, 4);
            v.data[i] = static_cast<double>(f);
        }
        store.add(name, std::move(v));
    }
    return store;
}

} // namespace ssg
