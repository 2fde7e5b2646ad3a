#include "fedlora/autonet.hpp"

#include <bit>
#include <cstring>
#include <string>

namespace fedlora {

namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'E', 'F', 'L'};

void put_u16(std::vector<std::uint8_t>& out, std::size_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
}

std::uint16_t get_u16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

void put_f32(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>((bits >> (8 * k)) & 0xFF));
}

float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(bits);
}

}  // namespace

std::size_t container_header_bytes(std::size_t layer_count) noexcept { return 4 + 1 + 1 + 4 * layer_count; }

std::vector<std::uint8_t> serialize(const Network& net) {
    const auto& layers = net.layers();
    if (layers.size() > 0xFF) throw Error("serialize: too many layers for the container");
    std::vector<std::uint8_t> out;
    out.reserve(container_header_bytes(layers.size()) + net.param_count() * 4);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(kContainerVersion);
    out.push_back(static_cast<std::uint8_t>(layers.size()));
    for (const auto& shape : layers) {
        if (shape.rows > 0xFFFF || shape.cols > 0xFFFF) throw Error("serialize: layer too wide for the container");
        put_u16(out, shape.rows);
        put_u16(out, shape.cols);
    }
    for (double p : net.params()) put_f32(out, p);
    return out;
}

std::vector<std::uint8_t> serialize(const AutoencoderModel& model) { return serialize(model.net); }

Network deserialize_network(std::span<const std::uint8_t> bytes, Activation hidden) {
    if (bytes.size() < 6) throw Error("deserialize: truncated header");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw Error("deserialize: bad magic");
    if (bytes[4] != kContainerVersion) throw Error("deserialize: unsupported version " + std::to_string(bytes[4]));
    const std::size_t layer_count = bytes[5];
    if (layer_count == 0) throw Error("deserialize: zero layers");
    const std::size_t header = container_header_bytes(layer_count);
    if (bytes.size() < header) throw Error("deserialize: truncated layer table");

    std::vector<std::size_t> dims;
    for (std::size_t l = 0; l < layer_count; ++l) {
        const std::size_t rows = get_u16(bytes.data() + 6 + 4 * l);
        const std::size_t cols = get_u16(bytes.data() + 8 + 4 * l);
        if (rows == 0 || cols == 0) throw Error("deserialize: zero-sized layer");
        if (l == 0) {
            dims.push_back(cols);
        } else if (cols != dims.back()) {
            throw Error("deserialize: layer " + std::to_string(l) + " does not chain onto its predecessor");
        }
        dims.push_back(rows);
    }
    Network net(dims, hidden);
    const std::size_t expected = header + net.param_count() * 4;
    if (bytes.size() < expected) throw Error("deserialize: truncated parameter payload");
    if (bytes.size() > expected) throw Error("deserialize: trailing bytes after payload");
    auto params = net.params();
    for (std::size_t k = 0; k < params.size(); ++k) params[k] = get_f32(bytes.data() + header + 4 * k);
    return net;
}

AutoencoderModel deserialize(std::span<const std::uint8_t> bytes, Activation hidden) {
    Network net = deserialize_network(bytes, hidden);
    const auto& dims = net.dims();
    const std::size_t n = dims.size();
    if (n < 3 || n % 2 == 0) throw Error("deserialize: not a mirrored autoencoder");
    for (std::size_t i = 0; i < n; ++i) {
        if (dims[i] != dims[n - 1 - i]) throw Error("deserialize: decoder does not mirror encoder");
    }
    ArchSpec arch;
    arch.input_dim = dims.front();
    arch.hidden_sizes.assign(dims.begin() + 1, dims.begin() + static_cast<std::ptrdiff_t>(n / 2 + 1));
    arch.activation = hidden;
    arch.validate();
    return AutoencoderModel{arch, std::move(net), 0};
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace fedlora
