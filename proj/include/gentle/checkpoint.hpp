#pragma once

// Versioned flat binary checkpoint for a single network: magic string,
// spec manifest (widths, activations, layer norm, head), then the
// parameters as little-endian 64-bit floats in manifest order.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "gentle/diffcore.hpp"

namespace gentle {

inline constexpr char kCheckpointMagic[8] = {'G', 'N', 'E', 'T', 'C', 'K', 'P', '1'};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
    // host is little-endian on every supported target
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const NetworkSpec& spec,
                            const ParamSet& params) {
    if (params.values.size() != spec.param_count())
        throw std::invalid_argument("save_checkpoint: param/spec mismatch");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_checkpoint: cannot open " + path);
    os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    detail::write_le<std::uint32_t>(os, params.version);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(spec.layer_widths.size()));
    for (int w : spec.layer_widths) detail::write_le<std::int32_t>(os, w);
    for (Activation a : spec.hidden_activations)
        detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(a));
    detail::write_le<std::uint8_t>(os, spec.layer_norm_after_first ? 1 : 0);
    detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(spec.output_head));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(params.values.size()));
    for (double v : params.values) detail::write_le<double>(os, v);
    if (!os) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

inline std::pair<NetworkSpec, ParamSet> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        throw std::runtime_error("load_checkpoint: bad magic in " + path);
    NetworkSpec spec;
    ParamSet params;
    params.version = detail::read_le<std::uint32_t>(is);
    const auto n_widths = detail::read_le<std::uint32_t>(is);
    spec.layer_widths.resize(n_widths);
    for (auto& w : spec.layer_widths) w = detail::read_le<std::int32_t>(is);
    spec.hidden_activations.resize(n_widths >= 2 ? n_widths - 2 : 0);
    for (auto& a : spec.hidden_activations)
        a = static_cast<Activation>(detail::read_le<std::uint8_t>(is));
    spec.layer_norm_after_first = detail::read_le<std::uint8_t>(is) != 0;
    spec.output_head = static_cast<OutputHead>(detail::read_le<std::uint8_t>(is));
    spec.validate();
    const auto count = detail::read_le<std::uint64_t>(is);
    if (count != spec.param_count())
        throw std::runtime_error("load_checkpoint: parameter count mismatch in " + path);
    params.values.resize(count);
    for (auto& v : params.values) v = detail::read_le<double>(is);
    return {spec, params};
}

}  // namespace gentle
