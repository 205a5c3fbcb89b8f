#include "roadsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace roadsr {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'R', 'P', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
  return v;
}

std::string get_bytes(std::istream& is, std::size_t n) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError("checkpoint truncated");
  return s;
}

}  // namespace

const MatrixXd& TensorArchive::get(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return m;
  }
  throw FormatError("checkpoint has no tensor '" + name + "'");
}

bool TensorArchive::has(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.first == name) return true;
  }
  return false;
}

void write_archive(const TensorArchive& a, std::ostream& os) {
  os.write(kMagic, sizeof kMagic);
  put_u32(os, TensorArchive::kVersion);
  const std::string meta = a.meta.dump();
  put_u32(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(os, static_cast<std::uint32_t>(a.tensors.size()));
  for (const auto& [name, m] : a.tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(m.rows()));
    put_u32(os, static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        os.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
}

TensorArchive read_archive(std::istream& is) {
  const std::string magic = get_bytes(is, sizeof kMagic);
  if (std::memcmp(magic.data(), kMagic, sizeof kMagic) != 0) throw FormatError("not a checkpoint file");
  const std::uint32_t version = get_u32(is);
  if (version != TensorArchive::kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  TensorArchive a;
  const std::string meta = get_bytes(is, get_u32(is));
  try {
    a.meta = nlohmann::ordered_json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_bytes(is, get_u32(is));
    const std::uint32_t rows = get_u32(is);
    const std::uint32_t cols = get_u32(is);
    MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r) {
      for (std::uint32_t c = 0; c < cols; ++c) {
        double v = 0.0;
        if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("checkpoint truncated");
        m(r, c) = v;
      }
    }
    a.add(std::move(name), std::move(m));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint");
  return a;
}

void save_archive(const TensorArchive& a, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  write_archive(a, os);
  if (!os.flush()) throw IoError("write failed: " + path);
}

TensorArchive load_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path);
  return read_archive(is);
}

nlohmann::ordered_json srp_config_json(const SrpConfig& cfg) {
  return {{"t_e", cfg.t_e},
          {"t_d", cfg.t_d},
          {"feature_dim", cfg.feature_dim},
          {"hidden_dim", cfg.hidden_dim},
          {"logit_embed_dim", cfg.logit_embed_dim}};
}

SrpConfig srp_config_from_json(const nlohmann::ordered_json& j) {
  SrpConfig cfg;
  try {
    cfg.t_e = j.at("t_e").get<int>();
    cfg.t_d = j.at("t_d").get<int>();
    cfg.feature_dim = j.at("feature_dim").get<int>();
    cfg.hidden_dim = j.at("hidden_dim").get<int>();
    cfg.logit_embed_dim = j.at("logit_embed_dim").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("srp config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

void put_srp(TensorArchive& a, const SrpParams& p, const SrpConfig& cfg) {
  a.meta["srp_config"] = srp_config_json(cfg);
  for (const auto& [name, m] : p.tensors()) a.add("srp." + name, *m);
}

SrpParams get_srp(const TensorArchive& a, SrpConfig* cfg_out) {
  if (!a.meta.contains("srp_config")) throw FormatError("checkpoint holds no SRP model");
  const SrpConfig cfg = srp_config_from_json(a.meta["srp_config"]);
  SrpParams p = SrpParams::zeros(cfg);
  for (auto& e : p.tensors()) {
    const MatrixXd& m = a.get("srp." + e.name);
    if (m.rows() != e.tensor->rows() || m.cols() != e.tensor->cols()) {
      throw FormatError("tensor '" + e.name + "' has the wrong shape");
    }
    *e.tensor = m;
  }
  if (cfg_out) *cfg_out = cfg;
  return p;
}

void put_head(TensorArchive& a, const std::string& prefix, const SoftmaxHead& h) {
  a.add(prefix + ".W", h.W);
  a.add(prefix + ".b", h.b);
}

SoftmaxHead get_head(const TensorArchive& a, const std::string& prefix) {
  SoftmaxHead h{a.get(prefix + ".W"), a.get(prefix + ".b")};
  if (h.b.cols() != 1 || h.b.rows() != h.W.cols()) throw FormatError("head '" + prefix + "' has inconsistent shapes");
  return h;
}

}  // namespace roadsr
