#include "fraclap/io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fraclap/error.hpp"

namespace fraclap {

namespace {

using nlohmann::json;

constexpr std::array<char, 4> kFieldMagic{'F', 'R', 'L', 'P'};
constexpr std::array<char, 4> kStencilMagic{'F', 'R', 'S', 'T'};

void put_u32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw FormatError("truncated file header");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

void put_doubles(std::ostream& os, const std::vector<double>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  } else {
    for (double x : v) {
      auto bits = std::bit_cast<std::uint64_t>(x);
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
      os.write(reinterpret_cast<const char*>(b), 8);
    }
  }
}

std::vector<double> get_doubles(std::istream& is, std::size_t n) {
  std::vector<double> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
    throw FormatError("truncated payload: expected " + std::to_string(n) + " values");
  if constexpr (std::endian::native != std::endian::little) {
    for (double& x : v) {
      unsigned char b[8];
      std::memcpy(b, &x, 8);
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
      x = std::bit_cast<double>(bits);
    }
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after payload");
  return v;
}

void write_container(const std::filesystem::path& path, const std::array<char, 4>& magic, const json& header,
                     const std::vector<double>& payload) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // write-then-rename so readers never observe a partial file
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot open " + tmp.string() + " for writing");
    const std::string text = header.dump();
    os.write(magic.data(), 4);
    put_u32(os, kFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_doubles(os, payload);
    if (!os) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

json read_container(std::ifstream& is, const std::filesystem::path& path, const std::array<char, 4>& magic) {
  if (!is) throw Error("cannot open " + path.string());
  std::array<char, 4> got{};
  if (!is.read(got.data(), 4) || got != magic)
    throw BadMagic(path.string() + ": bad magic, expected " + std::string(magic.data(), 4));
  const std::uint32_t version = get_u32(is);
  if (version != kFormatVersion) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  const std::uint32_t len = get_u32(is);
  if (len > (1u << 24)) throw FormatError(path.string() + ": header too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), len)) throw FormatError(path.string() + ": truncated header");
  try {
    json h = json::parse(text);
    if (!h.is_object()) throw FormatError(path.string() + ": header is not an object");
    return h;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": header is not valid JSON (" + e.what() + ")");
  }
}

template <class T>
T field_of(const json& h, const char* key) {
  if (!h.contains(key)) throw FormatError(std::string("header lacks '") + key + "'");
  try {
    return h.at(key).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string("header field '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_field(const std::filesystem::path& path, const Field& u) {
  const GridSpec& g = u.grid;
  json h;
  h["kind"] = "field";
  h["d"] = g.d;
  h["lo"] = std::vector<double>(g.lo.begin(), g.lo.begin() + g.d);
  h["hi"] = std::vector<double>(g.hi.begin(), g.hi.begin() + g.d);
  h["h"] = g.h;
  h["L"] = g.L;
  h["N"] = g.N;
  h["shape"] = std::vector<int>(g.n.begin(), g.n.begin() + g.d);
  h["ordering"] = "x-fastest";
  h["count"] = u.values.size();
  write_container(path, kFieldMagic, h, u.values);
}

Field read_field(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  const json h = read_container(is, path, kFieldMagic);
  if (field_of<std::string>(h, "ordering") != "x-fastest") throw FormatError("unsupported field ordering");
  const int d = field_of<int>(h, "d");
  const auto lo = field_of<std::vector<double>>(h, "lo");
  const auto hi = field_of<std::vector<double>>(h, "hi");
  const auto shape = field_of<std::vector<int>>(h, "shape");
  if ((d != 2 && d != 3) || lo.size() != std::size_t(d) || hi.size() != std::size_t(d) || shape.size() != std::size_t(d))
    throw FormatError("inconsistent field header dimensions");
  GridSpec g;
  try {
    g = GridSpec::box(lo, hi, field_of<int>(h, "N"));
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid grid in field header: ") + e.what());
  }
  for (int a = 0; a < d; ++a)
    if (g.n[a] != shape[a]) throw FormatError("field shape does not match its grid bounds");
  const auto count = field_of<std::size_t>(h, "count");
  if (count != g.size()) throw FormatError("field count does not match its shape");
  try {
    return Field(g, get_doubles(is, count));
  } catch (const DomainError& e) {
    throw FormatError(std::string("field payload rejected: ") + e.what());
  }
}

void write_stencil(const std::filesystem::path& path, const Stencil& st) {
  json h;
  h["kind"] = "stencil";
  h["d"] = st.params.d;
  h["alpha"] = st.params.alpha;
  h["gamma"] = st.params.gamma;
  h["N"] = st.N;
  h["h"] = st.h;
  h["rel_tol"] = st.rel_tol;
  h["c_norm"] = st.c_norm;
  h["tail"] = st.tail;
  h["extent"] = st.extent();
  h["count"] = st.coeffs.size();
  write_container(path, kStencilMagic, h, st.coeffs);
}

Stencil read_stencil(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  const json h = read_container(is, path, kStencilMagic);
  Stencil st;
  st.params = FracParams{field_of<int>(h, "d"), field_of<double>(h, "alpha"), field_of<double>(h, "gamma")};
  try {
    st.params.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("invalid parameters in stencil header: ") + e.what());
  }
  st.N = field_of<int>(h, "N");
  st.h = field_of<double>(h, "h");
  st.rel_tol = field_of<double>(h, "rel_tol");
  st.c_norm = field_of<double>(h, "c_norm");
  st.tail = field_of<double>(h, "tail");
  if (st.N < 2 || !(st.h > 0.0)) throw FormatError("invalid N or h in stencil header");
  std::size_t expect = 1;
  for (int a = 0; a < st.params.d; ++a) expect *= st.extent();
  if (field_of<std::size_t>(h, "count") != expect) throw FormatError("stencil count does not match (N+1)^d");
  st.coeffs = get_doubles(is, expect);
  return st;
}

std::string stencil_cache_name(const FracParams& params, int N, double h, double rel_tol) {
  std::ostringstream key;
  key.precision(17);
  key << params.d << '|' << params.alpha << '|' << params.gamma << '|' << N << '|' << h << '|' << rel_tol;
  // FNV-1a over the exact key text
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : key.str()) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  std::ostringstream name;
  name << "stencil-d" << params.d << "-N" << N << '-' << hex << ".frst";
  return name.str();
}

Stencil cached_stencil(const std::optional<std::filesystem::path>& dir, const FracParams& params, int N, double h,
                       const QuadConfig& cfg, int threads, bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  if (dir) {
    const auto path = *dir / stencil_cache_name(params, N, h, cfg.rel_tol);
    if (std::filesystem::exists(path)) {
      Stencil st = read_stencil(path);
      if (st.params.d == params.d && st.params.alpha == params.alpha && st.params.gamma == params.gamma &&
          st.N == N && st.h == h && st.rel_tol == cfg.rel_tol) {
        if (cache_hit) *cache_hit = true;
        return st;
      }
    }
  }
  Stencil st = build_stencil(params, N, h, cfg, threads);
  if (dir) write_stencil(*dir / stencil_cache_name(params, N, h, cfg.rel_tol), st);
  return st;
}

}  // namespace fraclap
