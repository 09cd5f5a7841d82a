#pragma once

// Binary containers for fields (FRLP) and stencils (FRST).
//
//   bytes 0-3   magic
//   u32         format version (1)
//   u32         byte length of the header
//   header      UTF-8 JSON object
//   payload     little-endian IEEE-754 doubles
//
// Field payload is x-fastest; stencil payload is the coefficient table in
// lexicographic index order (last index fastest).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fraclap/grid.hpp"
#include "fraclap/stencil.hpp"

namespace fraclap {

inline constexpr std::uint32_t kFormatVersion = 1;

void write_field(const std::filesystem::path& path, const Field& u);
Field read_field(const std::filesystem::path& path);

void write_stencil(const std::filesystem::path& path, const Stencil& st);
Stencil read_stencil(const std::filesystem::path& path);

/// File name for a stencil keyed by (d, alpha, gamma, N, h, rel_tol).
std::string stencil_cache_name(const FracParams& params, int N, double h, double rel_tol);

/// Loads a cached stencil whose header matches the key exactly, otherwise
/// builds it and (when dir is set) stores it. cache_hit reports which path ran.
Stencil cached_stencil(const std::optional<std::filesystem::path>& dir, const FracParams& params, int N, double h,
                       const QuadConfig& cfg, int threads = 0, bool* cache_hit = nullptr);

}  // namespace fraclap
