#pragma once

// Checkpoint file layout:
//   "DGLSTM01"                       8 magic bytes
//   JSON header                      one line, terminated by '\n'
//   float32 data                     little-endian, tensors in header order
// Header fields: schema, seed, config, hyper (free-form), tensors[] with
// name, rows, cols and offset (bytes from the start of the data section).

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "model.hpp"

namespace deepglstm {

inline constexpr char kCheckpointMagic[8] = {'D', 'G', 'L', 'S', 'T', 'M', '0', '1'};
inline constexpr int kCheckpointSchema = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Checkpoint {
    ModelParameters<float> params;
    std::uint64_t seed = 0;
    nlohmann::json hyper = nlohmann::json::object();
};

namespace detail {

inline std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
    return v;
}

inline nlohmann::json config_json(const ModelConfig& c) {
    return {{"blocks", c.blocks.str()},
            {"power_mode", to_string(c.power_mode)},
            {"encoder", to_string(c.encoder)},
            {"max_len", c.max_len},
            {"dropout", c.dropout}};
}

inline ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.blocks = BlockMask::parse(j.at("blocks").get<std::string>());
    c.power_mode = parse_power_mode(j.at("power_mode").get<std::string>());
    c.encoder = parse_encoder(j.at("encoder").get<std::string>());
    c.max_len = j.at("max_len").get<std::size_t>();
    c.dropout = j.at("dropout").get<double>();
    return c;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const ModelParameters<float>& params,
                            std::uint64_t seed, const nlohmann::json& hyper = nlohmann::json::object()) {
    nlohmann::json tensors = nlohmann::json::array();
    std::uint64_t offset = 0;
    const auto named = params.named();
    for (const auto& [name, value] : named) {
        tensors.push_back({{"name", name}, {"rows", value.shape().rows}, {"cols", value.shape().cols}, {"offset", offset}});
        offset += value.data().size() * sizeof(float);
    }
    const nlohmann::json header = {{"schema", kCheckpointSchema},
                                   {"seed", seed},
                                   {"config", detail::config_json(params.config)},
                                   {"hyper", hyper},
                                   {"tensors", tensors}};

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(kCheckpointMagic, sizeof kCheckpointMagic);
        const std::string h = header.dump() + "\n";
        out.write(h.data(), static_cast<std::streamsize>(h.size()));
        std::vector<std::uint32_t> buf;
        for (const auto& [name, value] : named) {
            buf.resize(value.data().size());
            for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = detail::to_little(std::bit_cast<std::uint32_t>(value.data()[i]));
            out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * 4));
        }
        if (!out) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw CheckpointError(path.string() + " is not a checkpoint (bad magic)");
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError(path.string() + ": missing header");
    const auto header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded()) throw CheckpointError(path.string() + ": header is not valid JSON");
    if (header.value("schema", 0) != kCheckpointSchema)
        throw CheckpointError(path.string() + ": unsupported schema " + header.value("schema", nlohmann::json()).dump());
    const std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Checkpoint ck;
    ck.seed = header.at("seed").get<std::uint64_t>();
    ck.hyper = header.value("hyper", nlohmann::json::object());
    ck.params = allocate_params<float>(detail::config_from_json(header.at("config")));
    auto named = ck.params.named();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != named.size())
        throw CheckpointError(path.string() + ": " + std::to_string(tensors.size()) + " tensors, model expects " +
                              std::to_string(named.size()));
    for (std::size_t t = 0; t < named.size(); ++t) {
        auto& [name, value] = named[t];
        const auto& e = tensors[t];
        const Shape shape{e.at("rows").get<std::size_t>(), e.at("cols").get<std::size_t>()};
        if (e.at("name").get<std::string>() != name || shape != value.shape())
            throw CheckpointError(path.string() + ": tensor " + std::to_string(t) + " is " + e.dump() + ", expected " +
                                  name + " " + value.shape().str());
        const auto offset = e.at("offset").get<std::size_t>();
        if (offset + shape.size() * 4 > data.size()) throw CheckpointError(path.string() + ": truncated data for " + name);
        auto& w = value.mutable_data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            std::uint32_t bits;
            std::memcpy(&bits, data.data() + offset + 4 * i, 4);
            w[i] = std::bit_cast<float>(detail::to_little(bits));
        }
    }
    return ck;
}

}  // namespace deepglstm
