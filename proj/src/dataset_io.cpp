#include "kktlab/dataset_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "kktlab/errors.hpp"
#include "kktlab/serialize.hpp"

namespace kktlab {

namespace {

constexpr char kMagic[4] = {'K', 'K', 'T', 'D'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "dataset files assume little-endian");

Json header_json(const Dataset& ds) {
  Json h = {{"format", "kktlab-dataset"},
            {"version", kVersion},
            {"n", ds.n()},
            {"d", ds.d()},
            {"seed", ds.seed},
            {"has_cluster_id", ds.cluster_id.has_value()}};
  h["spec"] = ds.spec ? to_json(*ds.spec) : Json(nullptr);
  return h;
}

void apply_header(const Json& h, Dataset& ds) {
  ds.seed = h.value("seed", std::uint64_t{0});
  if (h.contains("spec") && !h.at("spec").is_null()) {
    ds.spec = std::make_shared<const DistributionSpec>(spec_from_json(h.at("spec")));
  }
}

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ValidationError("truncated dataset file");
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset read_binary(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw ValidationError("unsupported dataset version " + std::to_string(version));
  const auto hlen = get<std::uint64_t>(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw ValidationError("truncated dataset header");
  const Json h = Json::parse(hs);
  const auto n = h.at("n").get<std::size_t>();
  const auto d = h.at("d").get<std::size_t>();
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  is.read(reinterpret_cast<char*>(ds.X.data()), static_cast<std::streamsize>(n * d * sizeof(double)));
  ds.y_clean.resize(static_cast<Eigen::Index>(n));
  ds.y_obs.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) ds.y_clean(static_cast<Eigen::Index>(i)) = get<std::int32_t>(is);
  for (std::size_t i = 0; i < n; ++i) ds.y_obs(static_cast<Eigen::Index>(i)) = get<std::int32_t>(is);
  ds.noise_mask.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.noise_mask[i] = get<std::uint8_t>(is) != 0;
  if (h.value("has_cluster_id", false)) {
    std::vector<int> ids(n);
    for (auto& c : ids) c = get<std::int32_t>(is);
    ds.cluster_id = std::move(ids);
  }
  apply_header(h, ds);
  ds.validate();
  return ds;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Dataset read_csv(std::istream& is) {
  std::string line;
  std::getline(is, line);
  if (line.rfind("# ", 0) != 0) throw ValidationError("CSV dataset must start with a '# {json}' line");
  const Json h = Json::parse(line.substr(2));
  const auto n = h.at("n").get<std::size_t>();
  const auto d = h.at("d").get<std::size_t>();
  std::getline(is, line);
  if (split(line).size() != d + 4) throw ValidationError("CSV header does not match d");
  Dataset ds;
  ds.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  ds.y_clean.resize(static_cast<Eigen::Index>(n));
  ds.y_obs.resize(static_cast<Eigen::Index>(n));
  ds.noise_mask.resize(n);
  std::vector<int> ids(n, 0);
  bool any_id = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::getline(is, line)) throw ValidationError("CSV dataset has fewer rows than n");
    const auto cells = split(line);
    if (cells.size() != d + 4) throw ValidationError("CSV row has the wrong number of cells");
    const auto r = static_cast<Eigen::Index>(i);
    if (!cells[1].empty()) {
      ids[i] = std::stoi(cells[1]);
      any_id = true;
    }
    ds.y_clean(r) = std::stoi(cells[2]);
    ds.y_obs(r) = std::stoi(cells[3]);
    ds.noise_mask[i] = ds.y_clean(r) != ds.y_obs(r);
    for (std::size_t j = 0; j < d; ++j) ds.X(r, static_cast<Eigen::Index>(j)) = std::stod(cells[4 + j]);
  }
  if (any_id || h.value("has_cluster_id", false)) ds.cluster_id = std::move(ids);
  apply_header(h, ds);
  ds.validate();
  return ds;
}

}  // namespace

void write_dataset_binary(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  const std::string h = header_json(ds).dump();
  os.write(kMagic, 4);
  put(os, kVersion);
  put(os, static_cast<std::uint64_t>(h.size()));
  os.write(h.data(), static_cast<std::streamsize>(h.size()));
  os.write(reinterpret_cast<const char*>(ds.X.data()),
           static_cast<std::streamsize>(ds.X.size() * static_cast<Eigen::Index>(sizeof(double))));
  for (Eigen::Index i = 0; i < ds.y_clean.size(); ++i) put(os, static_cast<std::int32_t>(ds.y_clean(i)));
  for (Eigen::Index i = 0; i < ds.y_obs.size(); ++i) put(os, static_cast<std::int32_t>(ds.y_obs(i)));
  for (bool b : ds.noise_mask) put(os, static_cast<std::uint8_t>(b ? 1 : 0));
  if (ds.cluster_id)
    for (int c : *ds.cluster_id) put(os, static_cast<std::int32_t>(c));
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  os << "# " << header_json(ds).dump() << '\n';
  os << "index,cluster_id,y_clean,y_obs";
  for (std::size_t j = 1; j <= ds.d(); ++j) os << ",x_" << j;
  os << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    os << i << ',';
    if (ds.cluster_id) os << (*ds.cluster_id)[i];
    os << ',' << ds.y_clean(r) << ',' << ds.y_obs(r);
    for (Eigen::Index j = 0; j < ds.X.cols(); ++j) os << ',' << fmt(ds.X(r, j));
    os << '\n';
  }
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open dataset '" + path + "'");
  char head[4] = {0, 0, 0, 0};
  is.read(head, 4);
  is.clear();
  is.seekg(0);
  if (std::equal(head, head + 4, kMagic)) return read_binary(is);
  return read_csv(is);
}

}  // namespace kktlab
