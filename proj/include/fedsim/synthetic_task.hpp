#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsim/checkpoint.hpp"
#include "fedsim/errors.hpp"
#include "fedsim/random.hpp"

namespace fedsim {

// Row-major feature matrix with one integer label per row.
struct DataSplit {
  std::size_t dim = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * dim, dim);
  }

  void push_back(std::span<const double> x, int label) {
    if (x.size() != dim)
      throw ShapeError("feature vector has dimension " + std::to_string(x.size()) +
                       ", expected " + std::to_string(dim));
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(label);
  }

  void append(const DataSplit& other) {
    if (other.dim != dim) throw ShapeError("cannot append splits of different dimension");
    features.insert(features.end(), other.features.begin(), other.features.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  }

  bool operator==(const DataSplit&) const = default;
};

struct ClientDataset {
  int client_id = 0;
  DataSplit train, val, test;

  bool operator==(const ClientDataset&) const = default;
};

struct SplitSizes {
  std::size_t train = 200;
  std::size_t val = 67;
  std::size_t test = 67;

  bool operator==(const SplitSizes&) const = default;
};

struct HeterogeneityConfig {
  double label_skew_alpha = 0.3;
  double feature_shift_scale = 0.5;
  std::uint64_t seed = 1;

  bool operator==(const HeterogeneityConfig&) const = default;
};

struct FederationConfig {
  std::size_t num_clients = 8;
  SplitSizes split;
  std::size_t feature_dim = 32;
  std::size_t num_classes = 4;
  // Per-coordinate standard deviation of the class means.
  double class_separation = 0.35;
  double noise_std = 1.0;
  HeterogeneityConfig heterogeneity;

  bool operator==(const FederationConfig&) const = default;

  void validate() const {
    if (num_clients < 1) throw ConfigError("num_clients must be at least 1");
    if (split.train < 1 || split.val < 1 || split.test < 1)
      throw ConfigError("every split size must be at least 1");
    if (feature_dim < 1) throw ConfigError("feature_dim must be at least 1");
    if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
    if (!(heterogeneity.label_skew_alpha > 0.0) ||
        !std::isfinite(heterogeneity.label_skew_alpha))
      throw ConfigError("label_skew_alpha must be positive");
    if (!(heterogeneity.feature_shift_scale >= 0.0) ||
        !std::isfinite(heterogeneity.feature_shift_scale))
      throw ConfigError("feature_shift_scale must be nonnegative");
    if (!(class_separation >= 0.0) || !std::isfinite(class_separation))
      throw ConfigError("class_separation must be nonnegative");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
      throw ConfigError("noise_std must be nonnegative");
  }
};

struct Federation {
  std::size_t num_classes = 0;
  std::vector<ClientDataset> clients;
  // Union of all clients, concatenated in client order. client_id is 0.
  ClientDataset group_all;

  bool operator==(const Federation&) const = default;
};

inline ClientDataset pool_clients(std::span<const ClientDataset> clients) {
  ClientDataset all;
  all.client_id = 0;
  const std::size_t dim = clients.empty() ? 0 : clients.front().train.dim;
  all.train.dim = all.val.dim = all.test.dim = dim;
  for (const auto& c : clients) {
    all.train.append(c.train);
    all.val.append(c.val);
    all.test.append(c.test);
  }
  return all;
}

// Each client k draws a label distribution from Dirichlet(alpha) and a
// feature offset from N(0, shift^2 I). Examples are class mean + client
// offset + isotropic noise. Client k uses its own stream derived from
// (seed, k), so clients do not depend on each other's sizes.
inline Federation generate_federation(const FederationConfig& cfg) {
  cfg.validate();
  const auto d = cfg.feature_dim;
  const auto C = cfg.num_classes;
  const auto& het = cfg.heterogeneity;

  Rng shared(derive_seed({het.seed, 0}));
  std::vector<double> class_means(C * d);
  for (auto& m : class_means) m = cfg.class_separation * shared.normal();

  Federation fed;
  fed.num_classes = C;
  std::vector<double> x(d);
  for (std::size_t k = 1; k <= cfg.num_clients; ++k) {
    Rng rng(derive_seed({het.seed, k}));
    const auto label_probs = rng.dirichlet(C, het.label_skew_alpha);
    std::vector<double> shift(d);
    for (auto& s : shift) s = het.feature_shift_scale * rng.normal();

    ClientDataset client;
    client.client_id = static_cast<int>(k);
    auto fill = [&](DataSplit& split, std::size_t n) {
      split.dim = d;
      split.features.reserve(n * d);
      split.labels.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto y = rng.categorical(label_probs);
        for (std::size_t j = 0; j < d; ++j)
          x[j] = class_means[y * d + j] + shift[j] + cfg.noise_std * rng.normal();
        split.push_back(x, static_cast<int>(y));
      }
    };
    fill(client.train, cfg.split.train);
    fill(client.val, cfg.split.val);
    fill(client.test, cfg.split.test);
    fed.clients.push_back(std::move(client));
  }
  fed.group_all = pool_clients(fed.clients);
  return fed;
}

inline std::vector<std::size_t> label_histogram(const DataSplit& split,
                                                std::size_t num_classes) {
  std::vector<std::size_t> h(num_classes, 0);
  for (int y : split.labels) ++h.at(static_cast<std::size_t>(y));
  return h;
}

// --- persistence -----------------------------------------------------------
//
// A federation on disk is a directory holding manifest.json and one
// client_<id>.csv per client. Each CSV has the header
//   split,label,x0,...,x<d-1>
// followed by one row per example (split in {train,val,test}); reals are
// written with 17 significant digits so they read back bit-exactly.

inline std::string encode_client_csv(const ClientDataset& c) {
  std::string out = "split,label";
  const auto dim = c.train.dim;
  for (std::size_t j = 0; j < dim; ++j) out += ",x" + std::to_string(j);
  out += '\n';
  char buf[32];
  auto emit = [&](const char* name, const DataSplit& s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out += name;
      out += ',';
      out += std::to_string(s.labels[i]);
      for (double v : s.row(i)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
      }
      out += '\n';
    }
  };
  emit("train", c.train);
  emit("val", c.val);
  emit("test", c.test);
  return out;
}

inline ClientDataset decode_client_csv(const std::string& text, int client_id,
                                       std::size_t dim) {
  ClientDataset c;
  c.client_id = client_id;
  c.train.dim = c.val.dim = c.test.dim = dim;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("client file is empty");
  std::vector<double> x(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    auto fail = [&](const std::string& why) {
      throw ValidationError("client " + std::to_string(client_id) + " line " +
                            std::to_string(lineno) + ": " + why);
    };
    if (!std::getline(row, field, ',')) fail("missing split");
    DataSplit* target = field == "train" ? &c.train
                        : field == "val" ? &c.val
                        : field == "test" ? &c.test
                                          : nullptr;
    if (!target) fail("unknown split '" + field + "'");
    if (!std::getline(row, field, ',')) fail("missing label");
    int label = 0;
    try {
      label = std::stoi(field);
      for (std::size_t j = 0; j < dim; ++j) {
        if (!std::getline(row, field, ',')) fail("too few features");
        x[j] = std::stod(field);
      }
    } catch (const std::logic_error&) {
      fail("malformed number");
    }
    if (std::getline(row, field, ',')) fail("too many fields");
    target->push_back(x, label);
  }
  return c;
}

inline nlohmann::json federation_manifest(const FederationConfig& cfg,
                                          const Federation& fed) {
  nlohmann::json clients = nlohmann::json::array();
  for (const auto& c : fed.clients)
    clients.push_back({{"client_id", c.client_id},
                       {"file", "client_" + std::to_string(c.client_id) + ".csv"},
                       {"train", c.train.size()},
                       {"val", c.val.size()},
                       {"test", c.test.size()}});
  return {{"format", "fedsim-federation"},
          {"version", 1},
          {"num_clients", fed.clients.size()},
          {"feature_dim", cfg.feature_dim},
          {"num_classes", fed.num_classes},
          {"split", {{"train", cfg.split.train}, {"val", cfg.split.val}, {"test", cfg.split.test}}},
          {"heterogeneity",
           {{"label_skew_alpha", cfg.heterogeneity.label_skew_alpha},
            {"feature_shift_scale", cfg.heterogeneity.feature_shift_scale},
            {"seed", cfg.heterogeneity.seed}}},
          {"group_all",
           {{"train", fed.group_all.train.size()},
            {"val", fed.group_all.val.size()},
            {"test", fed.group_all.test.size()}}},
          {"clients", clients}};
}

inline void save_federation(const std::filesystem::path& dir,
                            const FederationConfig& cfg, const Federation& fed) {
  std::filesystem::create_directories(dir);
  for (const auto& c : fed.clients)
    write_file_atomic(dir / ("client_" + std::to_string(c.client_id) + ".csv"),
                      encode_client_csv(c));
  write_file_atomic(dir / "manifest.json", federation_manifest(cfg, fed).dump(2) + "\n");
}

inline Federation load_federation(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad federation manifest: ") + e.what());
  }
  Federation fed;
  try {
    fed.num_classes = manifest.at("num_classes").get<std::size_t>();
    const auto dim = manifest.at("feature_dim").get<std::size_t>();
    for (const auto& entry : manifest.at("clients")) {
      const int id = entry.at("client_id").get<int>();
      auto c = decode_client_csv(read_file(dir / entry.at("file").get<std::string>()), id, dim);
      if (c.train.size() != entry.at("train").get<std::size_t>() ||
          c.val.size() != entry.at("val").get<std::size_t>() ||
          c.test.size() != entry.at("test").get<std::size_t>())
        throw ValidationError("client " + std::to_string(id) +
                              " row counts disagree with the manifest");
      for (const auto* s : {&c.train, &c.val, &c.test})
        for (int y : s->labels)
          if (y < 0 || static_cast<std::size_t>(y) >= fed.num_classes)
            throw ValidationError("label out of range in client " + std::to_string(id));
      fed.clients.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad federation manifest: ") + e.what());
  }
  fed.group_all = pool_clients(fed.clients);
  return fed;
}

}  // namespace fedsim
