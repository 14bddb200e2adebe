#include "dgame/trajectory.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dgame {

using nlohmann::json;

Trajectory Trajectory::resampled(int stride) const {
  if (stride <= 1) return *this;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < points(); j += stride) keep.push_back(j);
  if (keep.back() != points() - 1) keep.push_back(points() - 1);
  Trajectory out;
  auto n = static_cast<Eigen::Index>(keep.size());
  out.times = Vec(n);
  out.states = Mat(states.rows(), n);
  out.controls = Mat(controls.rows(), n);
  out.values = Mat(2, n);
  out.costates = {Mat(states.rows(), n), Mat(states.rows(), n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.times[k] = times[keep[k]];
    out.states.col(k) = states.col(keep[k]);
    out.controls.col(k) = controls.col(keep[k]);
    out.values.col(k) = values.col(keep[k]);
    out.costates[0].col(k) = costates[0].col(keep[k]);
    out.costates[1].col(k) = costates[1].col(keep[k]);
  }
  out.converged = converged;
  out.residual_norm = residual_norm;
  out.warm_start = warm_start;
  out.newton_iterations = newton_iterations;
  return out;
}

Vec path_reward_values(const Game& game, int player, double theta_i,
                       const Vec& times, const Mat& states,
                       const Mat& controls) {
  const Eigen::Index n = times.size();
  Vec vals(n);
  const int m = game.control_dim();
  Vec losses(n);
  for (Eigen::Index j = 0; j < n; ++j)
    losses[j] = game.running_loss(player, states.col(j),
                                  controls.col(j).segment(player * m, m),
                                  theta_i, true);
  vals[n - 1] = -game.terminal_loss(player, states.col(n - 1));
  for (Eigen::Index j = n - 2; j >= 0; --j) {
    double dt = times[j + 1] - times[j];
    vals[j] = vals[j + 1] - 0.5 * dt * (losses[j] + losses[j + 1]);
  }
  return vals;
}

Eigen::Index SupervisedDataset::total_points() const {
  Eigen::Index n = 0;
  for (const auto& tr : trajectories) n += tr.points();
  return n;
}

void SupervisedDataset::player_matrices(int player, Mat& X, Vec& values,
                                        Mat& costates) const {
  const Eigen::Index total = total_points();
  if (trajectories.empty()) {
    X.resize(0, 0);
    return;
  }
  const Eigen::Index sdim = trajectories.front().states.rows();
  X.resize(sdim + 1, total);
  values.resize(total);
  costates.resize(sdim, total);
  Eigen::Index col = 0;
  for (const auto& tr : trajectories) {
    for (Eigen::Index j = 0; j < tr.points(); ++j, ++col) {
      X.col(col).head(sdim) = tr.states.col(j);
      X(sdim, col) = tr.times[j];
      values[col] = tr.values(player, j);
      costates.col(col) = tr.costates[static_cast<std::size_t>(player)].col(j);
    }
  }
}

namespace {

json meta_to_json(const DatasetMeta& m, const SupervisedDataset& ds) {
  json j;
  j["game_case"] = m.game_case;
  j["game_hash"] = hex64(m.game_hash);
  j["theta1"] = m.theta1;
  j["theta2"] = m.theta2;
  j["n_requested"] = m.n_requested;
  j["n_converged"] = m.n_converged;
  j["n_failed"] = m.n_failed;
  j["seed"] = m.seed;
  j["dt_sample"] = m.dt_sample;
  j["lo"] = std::vector<double>(m.lo.data(), m.lo.data() + m.lo.size());
  j["hi"] = std::vector<double>(m.hi.data(), m.hi.data() + m.hi.size());
  j["n_trajectories"] = ds.trajectories.size();
  j["total_points"] = ds.total_points();
  return j;
}

DatasetMeta meta_from_json(const json& j) {
  DatasetMeta m;
  m.game_case = j.at("game_case").get<std::string>();
  m.game_hash = std::stoull(j.at("game_hash").get<std::string>(), nullptr, 16);
  m.theta1 = j.at("theta1").get<double>();
  m.theta2 = j.at("theta2").get<double>();
  m.n_requested = j.at("n_requested").get<int>();
  m.n_converged = j.at("n_converged").get<int>();
  m.n_failed = j.at("n_failed").get<int>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.dt_sample = j.at("dt_sample").get<double>();
  auto lo = j.at("lo").get<std::vector<double>>();
  auto hi = j.at("hi").get<std::vector<double>>();
  m.lo = Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  m.hi = Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  return m;
}

}  // namespace

void SupervisedDataset::save_manifest(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out << meta_to_json(meta, *this).dump(2) << "\n";
}

void SupervisedDataset::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  if (trajectories.empty()) throw std::runtime_error("dataset: empty");
  const Eigen::Index sdim = trajectories.front().states.rows();
  const Eigen::Index cdim = trajectories.front().controls.rows();
  out << "t";
  for (Eigen::Index i = 0; i < sdim; ++i) out << ",x" << i;
  for (Eigen::Index i = 0; i < cdim; ++i) out << ",u" << i;
  out << ",v1,v2";
  for (Eigen::Index i = 0; i < sdim; ++i) out << ",l1_" << i;
  for (Eigen::Index i = 0; i < sdim; ++i) out << ",l2_" << i;
  out << "\n";
  for (const auto& tr : trajectories) {
    for (Eigen::Index j = 0; j < tr.points(); ++j) {
      out << format_double(tr.times[j]);
      for (Eigen::Index i = 0; i < sdim; ++i)
        out << "," << format_double(tr.states(i, j));
      for (Eigen::Index i = 0; i < cdim; ++i)
        out << "," << format_double(tr.controls(i, j));
      out << "," << format_double(tr.values(0, j)) << ","
          << format_double(tr.values(1, j));
      for (Eigen::Index i = 0; i < sdim; ++i)
        out << "," << format_double(tr.costates[0](i, j));
      for (Eigen::Index i = 0; i < sdim; ++i)
        out << "," << format_double(tr.costates[1](i, j));
      out << "\n";
    }
  }
}

SupervisedDataset SupervisedDataset::load_csv(const std::string& path,
                                              const std::string& manifest_path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  std::string header;
  std::getline(in, header);
  Eigen::Index sdim = 0, cdim = 0;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ',')) {
      if (col.size() > 1 && col[0] == 'x' && col.find('_') == std::string::npos)
        ++sdim;
      if (col.size() > 1 && col[0] == 'u') ++cdim;
    }
  }
  SupervisedDataset ds;
  {
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("dataset: cannot open " + manifest_path);
    json j;
    mf >> j;
    ds.meta = meta_from_json(j);
  }
  std::vector<std::vector<Vec>> rows_by_traj;
  std::string line;
  double prev_t = 1e300;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ls, tok, ',')) row.push_back(std::stod(tok));
    Vec r = Eigen::Map<const Vec>(row.data(), static_cast<Eigen::Index>(row.size()));
    if (r[0] <= prev_t || rows_by_traj.empty()) rows_by_traj.emplace_back();
    prev_t = r[0];
    rows_by_traj.back().push_back(r);
  }
  for (const auto& rows : rows_by_traj) {
    Trajectory tr;
    auto n = static_cast<Eigen::Index>(rows.size());
    tr.times = Vec(n);
    tr.states = Mat(sdim, n);
    tr.controls = Mat(cdim, n);
    tr.values = Mat(2, n);
    tr.costates = {Mat(sdim, n), Mat(sdim, n)};
    for (Eigen::Index j = 0; j < n; ++j) {
      const Vec& r = rows[static_cast<std::size_t>(j)];
      Eigen::Index off = 0;
      tr.times[j] = r[off++];
      tr.states.col(j) = r.segment(off, sdim);
      off += sdim;
      tr.controls.col(j) = r.segment(off, cdim);
      off += cdim;
      tr.values(0, j) = r[off++];
      tr.values(1, j) = r[off++];
      tr.costates[0].col(j) = r.segment(off, sdim);
      off += sdim;
      tr.costates[1].col(j) = r.segment(off, sdim);
    }
    tr.converged = true;
    ds.trajectories.push_back(std::move(tr));
  }
  return ds;
}

namespace {

constexpr char kDsMagic[4] = {'D', 'G', 'D', 'S'};

template <typename T>
void bput(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T bget(std::ifstream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("dataset: truncated file");
  return v;
}

void bput_mat(std::ofstream& out, const Mat& m) {
  bput<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  bput<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Mat bget_mat(std::ifstream& in) {
  auto r = bget<std::uint64_t>(in);
  auto c = bget<std::uint64_t>(in);
  Mat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw std::runtime_error("dataset: truncated file");
  return m;
}

}  // namespace

void SupervisedDataset::save_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("dataset: cannot write " + path);
  out.write(kDsMagic, 4);
  bput<std::uint32_t>(out, 1);
  bput<std::uint64_t>(out, trajectories.size());
  for (const auto& tr : trajectories) {
    bput_mat(out, Mat(tr.times.transpose()));
    bput_mat(out, tr.states);
    bput_mat(out, tr.controls);
    bput_mat(out, tr.values);
    bput_mat(out, tr.costates[0]);
    bput_mat(out, tr.costates[1]);
  }
}

SupervisedDataset SupervisedDataset::load_binary(
    const std::string& path, const std::string& manifest_path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("dataset: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kDsMagic, 4))
    throw std::runtime_error("dataset: bad magic");
  auto version = bget<std::uint32_t>(in);
  if (version != 1) throw std::runtime_error("dataset: unsupported version");
  SupervisedDataset ds;
  {
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("dataset: cannot open " + manifest_path);
    json j;
    mf >> j;
    ds.meta = meta_from_json(j);
  }
  auto n = bget<std::uint64_t>(in);
  ds.trajectories.resize(n);
  for (auto& tr : ds.trajectories) {
    Mat t = bget_mat(in);
    tr.times = t.transpose();
    tr.states = bget_mat(in);
    tr.controls = bget_mat(in);
    tr.values = bget_mat(in);
    tr.costates.resize(2);
    tr.costates[0] = bget_mat(in);
    tr.costates[1] = bget_mat(in);
    tr.converged = true;
  }
  return ds;
}

}  // namespace dgame
