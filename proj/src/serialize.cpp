#include <fstream>

#include "tocflow/io.hpp"

namespace tocflow {

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Row-major flat data with a shape header.
json mat_json(const Mat& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return {{"shape", {m.rows(), m.cols()}}, {"data", flat}};
}

Mat json_mat(const json& j) {
  const auto shape = j.at("shape").get<std::vector<long>>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (shape.size() != 2 || static_cast<long>(flat.size()) != shape[0] * shape[1])
    throw ShapeError("matrix json: shape does not match data");
  Mat m(shape[0], shape[1]);
  for (long i = 0; i < shape[0]; ++i)
    for (long k = 0; k < shape[1]; ++k) m(i, k) = flat[i * shape[1] + k];
  return m;
}

Mat nested_mat(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Mat m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != static_cast<std::size_t>(m.cols())) throw ShapeError("ragged nested matrix");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

}  // namespace

json mixture_to_json(const GaussianMixtureField& f) {
  json comps = json::array();
  for (const auto& c : f.components())
    comps.push_back({{"weight", c.weight}, {"mean", vec_json(c.mean)}, {"basis", mat_json(c.basis)},
                     {"eigvals", vec_json(c.eigvals)}, {"floor", c.floor}});
  return {{"type", "gaussian_mixture"}, {"dim", f.dim()}, {"components", comps}};
}

GaussianMixtureField mixture_from_json(const json& j) {
  if (j.contains("chol")) {
    std::vector<double> w = j.at("weights").get<std::vector<double>>();
    std::vector<Vec> means;
    std::vector<Mat> chol;
    for (const auto& m : j.at("means")) means.push_back(json_vec(m));
    for (const auto& l : j.at("chol")) chol.push_back(nested_mat(l));
    return GaussianMixtureField(w, means, chol);
  }
  std::vector<MixtureComponent> comps;
  for (const auto& cj : j.at("components")) {
    MixtureComponent c;
    c.weight = cj.at("weight").get<double>();
    c.mean = json_vec(cj.at("mean"));
    c.basis = json_mat(cj.at("basis"));
    c.eigvals = json_vec(cj.at("eigvals"));
    c.floor = cj.value("floor", 0.0);
    comps.push_back(std::move(c));
  }
  return GaussianMixtureField(std::move(comps));
}

json mlp_to_json(const NeuralMLPField& f) {
  json layers = json::array();
  for (std::size_t l = 0; l < f.weights().size(); ++l)
    layers.push_back({{"weight", mat_json(f.weights()[l])}, {"bias", vec_json(f.biases()[l])}});
  return {{"type", "mlp"}, {"activation", to_string(f.activation())}, {"layers", layers}};
}

NeuralMLPField mlp_from_json(const json& j) {
  std::vector<Mat> w;
  std::vector<Vec> b;
  for (const auto& l : j.at("layers")) {
    w.push_back(json_mat(l.at("weight")));
    b.push_back(json_vec(l.at("bias")));
  }
  return NeuralMLPField(std::move(w), std::move(b), activation_from_string(j.at("activation")));
}

void write_array(const fs::path& base, const std::vector<Vec>& rows, json meta) {
  const std::size_t cols = rows.empty() ? 0 : static_cast<std::size_t>(rows[0].size());
  fs::path bin = base;
  bin += ".bin";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw IoError("cannot write " + bin.string());
  for (const auto& r : rows) {
    if (static_cast<std::size_t>(r.size()) != cols) throw ShapeError("write_array: ragged rows");
    out.write(reinterpret_cast<const char*>(r.data()), static_cast<std::streamsize>(cols * sizeof(double)));
  }
  if (!out) throw IoError("short write to " + bin.string());
  meta["shape"] = {rows.size(), cols};
  meta["dtype"] = "float64";
  meta["file"] = bin.filename().string();
  fs::path side = base;
  side += ".json";
  write_json(meta, side);
}

std::vector<Vec> read_array(const fs::path& base, json* meta) {
  fs::path side = base, bin = base;
  side += ".json";
  bin += ".bin";
  std::ifstream sj(side);
  if (!sj) throw IoError("missing sidecar " + side.string());
  const json m = json::parse(sj);
  if (m.at("dtype") != "float64") throw IoError("unsupported dtype in " + side.string());
  const auto shape = m.at("shape").get<std::vector<std::size_t>>();
  std::ifstream in(bin, std::ios::binary);
  if (!in) throw IoError("missing array data " + bin.string());
  std::vector<Vec> rows(shape.at(0), Vec(static_cast<Eigen::Index>(shape.at(1))));
  for (auto& r : rows)
    in.read(reinterpret_cast<char*>(r.data()), static_cast<std::streamsize>(shape[1] * sizeof(double)));
  if (!in) throw IoError("truncated array data " + bin.string());
  if (meta) *meta = m;
  return rows;
}

void write_json(const json& j, const fs::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("short write to " + file.string());
}

}  // namespace tocflow
