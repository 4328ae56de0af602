#pragma once

#include <bit>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

enum class ArgRole { input, output, scalar };
enum class ElementType { f32, i32 };

inline const char* to_string(ArgRole role) {
    switch (role) {
        case ArgRole::input: return "input";
        case ArgRole::output: return "output";
        case ArgRole::scalar: return "scalar";
    }
    return "?";
}

inline const char* to_string(ElementType type) {
    switch (type) {
        case ElementType::f32: return "f32";
        case ElementType::i32: return "i32";
    }
    return "?";
}

inline ArgRole arg_role_from(const std::string& name) {
    if (name == "input") return ArgRole::input;
    if (name == "output") return ArgRole::output;
    if (name == "scalar") return ArgRole::scalar;
    throw Error("unknown argument role \"" + name
                + "\" (expected input, output or scalar)");
}

inline ElementType element_type_from(const std::string& name) {
    if (name == "f32") return ElementType::f32;
    if (name == "i32") return ElementType::i32;
    throw Error("unknown element type \"" + name + "\" (expected f32 or i32)");
}

/// One kernel argument. Buffers carry a length and a fill recipe; scalars
/// carry a single numeric value. Fill recipes are a closed list:
///
///   "none"          zero-initialized (the default, typical for outputs)
///   "constant:<v>"  every element equals v
///   "ramp"          element i equals i
///   "uniform:<s>"   per-element uniform draws from a generator seeded s;
///                   f32 in [0,1), i32 in [0,1000)
struct ArgumentSpec {
    ArgRole role = ArgRole::input;
    ElementType type = ElementType::f32;
    size_t length = 0;     // buffers only
    double value = 0.0;    // scalars only
    std::string fill = "none";
};

using BufferF32 = std::vector<float>;
using BufferI32 = std::vector<int32_t>;
using Buffer = std::variant<BufferF32, BufferI32>;

inline size_t buffer_length(const Buffer& buffer) {
    return std::visit([](const auto& data) { return data.size(); }, buffer);
}

inline ElementType buffer_type(const Buffer& buffer) {
    return std::holds_alternative<BufferF32>(buffer) ? ElementType::f32
                                                     : ElementType::i32;
}

namespace detail {

struct FillRecipe {
    enum class Kind { none, constant, ramp, uniform } kind = Kind::none;
    double constant = 0.0;
    uint64_t seed = 0;
};

inline FillRecipe parse_fill(const std::string& fill) {
    FillRecipe recipe;
    if (fill.empty() || fill == "none") {
        return recipe;
    }
    if (fill == "ramp") {
        recipe.kind = FillRecipe::Kind::ramp;
        return recipe;
    }
    auto colon = fill.find(':');
    std::string head = fill.substr(0, colon);
    std::string tail = colon == std::string::npos ? "" : fill.substr(colon + 1);
    try {
        if (head == "constant") {
            recipe.kind = FillRecipe::Kind::constant;
            size_t used = 0;
            recipe.constant = std::stod(tail, &used);
            if (used != tail.size()) {
                throw Error("");
            }
            return recipe;
        }
        if (head == "uniform") {
            recipe.kind = FillRecipe::Kind::uniform;
            size_t used = 0;
            recipe.seed = std::stoull(tail, &used);
            if (used != tail.size()) {
                throw Error("");
            }
            return recipe;
        }
    } catch (const std::exception&) {
        throw Error("malformed fill recipe \"" + fill + "\"");
    }
    throw Error("unknown fill recipe \"" + fill
                + "\" (expected none, constant:<v>, ramp or uniform:<seed>)");
}

}  // namespace detail

/// Builds the initial contents of a buffer argument.
inline Buffer materialize_argument(const ArgumentSpec& arg) {
    if (arg.role == ArgRole::scalar) {
        throw Error("materialize_argument called on a scalar argument");
    }
    detail::FillRecipe recipe = detail::parse_fill(arg.fill);
    using Kind = detail::FillRecipe::Kind;
    if (arg.type == ElementType::f32) {
        BufferF32 data(arg.length, 0.0f);
        switch (recipe.kind) {
            case Kind::none:
                break;
            case Kind::constant:
                for (float& v: data) {
                    v = static_cast<float>(recipe.constant);
                }
                break;
            case Kind::ramp:
                for (size_t i = 0; i < data.size(); ++i) {
                    data[i] = static_cast<float>(i);
                }
                break;
            case Kind::uniform: {
                Rng rng(recipe.seed);
                for (float& v: data) {
                    v = static_cast<float>(uniform01(rng));
                }
                break;
            }
        }
        return data;
    }
    BufferI32 data(arg.length, 0);
    switch (recipe.kind) {
        case Kind::none:
            break;
        case Kind::constant:
            for (int32_t& v: data) {
                v = static_cast<int32_t>(recipe.constant);
            }
            break;
        case Kind::ramp:
            for (size_t i = 0; i < data.size(); ++i) {
                data[i] = static_cast<int32_t>(i);
            }
            break;
        case Kind::uniform: {
            Rng rng(recipe.seed);
            for (int32_t& v: data) {
                v = static_cast<int32_t>(uniform_index(rng, 1000));
            }
            break;
        }
    }
    return data;
}

/// FNV-1a 64 digest over the buffer's elements serialized as 4-byte
/// little-endian words, independent of host endianness.
inline uint64_t buffer_digest(const Buffer& buffer) {
    uint64_t hash = 0xcbf29ce484222325ull;
    auto mix_word = [&hash](uint32_t word) {
        unsigned char bytes[4] = {
            static_cast<unsigned char>(word & 0xff),
            static_cast<unsigned char>((word >> 8) & 0xff),
            static_cast<unsigned char>((word >> 16) & 0xff),
            static_cast<unsigned char>((word >> 24) & 0xff),
        };
        hash = fnv1a64(bytes, 4, hash);
    };
    if (const auto* f32 = std::get_if<BufferF32>(&buffer)) {
        for (float v: *f32) {
            mix_word(std::bit_cast<uint32_t>(v));
        }
    } else {
        for (int32_t v: std::get<BufferI32>(buffer)) {
            mix_word(static_cast<uint32_t>(v));
        }
    }
    return hash;
}

/// 16-digit lowercase hex form of a digest, as used in runner responses.
inline std::string digest_hex(uint64_t digest) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = hex[digest & 0xf];
        digest >>= 4;
    }
    return out;
}

}  // namespace ktune
