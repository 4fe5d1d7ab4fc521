#include "sgcrl/repr.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sgcrl/io_util.hpp"

namespace sgcrl {

void UpdateConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

EmbeddingTable::EmbeddingTable(Matrix vectors) : vectors_(std::move(vectors)) {}

void EmbeddingTable::apply_update(const Matrix& delta, std::span<const StateId> touched,
                                  bool normalize) {
  for (StateId s : touched) {
    vectors_.row(s) += delta.row(s);
    if (normalize) {
      const double n = vectors_.row(s).norm();
      if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("degenerate embedding row");
      vectors_.row(s) /= n;
    }
  }
  restore_pins();
}

void EmbeddingTable::normalize_rows() {
  for (Eigen::Index s = 0; s < vectors_.rows(); ++s) {
    const double n = vectors_.row(s).norm();
    if (!(n > 0.0)) throw NumericalError("cannot normalize a zero embedding row");
    vectors_.row(s) /= n;
  }
  restore_pins();
}

void EmbeddingTable::pin(StateId s, const Vector& target) {
  if (s < 0 || s >= num_states()) throw ConfigError("pinned state out of range");
  if (target.size() != dim()) throw ConfigError("pin target has wrong dimension");
  pins_[s] = target;
  vectors_.row(s) = target.transpose();
}

void EmbeddingTable::restore_pins() {
  for (const auto& [s, v] : pins_) vectors_.row(s) = v.transpose();
}

double EmbeddingTable::max_norm_deviation() const {
  double worst = 0.0;
  for (Eigen::Index s = 0; s < vectors_.rows(); ++s)
    worst = std::max(worst, std::abs(vectors_.row(s).norm() - 1.0));
  return worst;
}

TableInit init_table_with_common(int num_states, int dim, double common_scale,
                                 double noise_scale, std::uint64_t seed) {
  if (num_states < 1) throw ConfigError("num_states must be >= 1");
  if (dim < 2) throw ConfigError("embedding dim must be >= 2");
  if (noise_scale < 0.0) throw ConfigError("noise_scale must be >= 0");
  Rng rng = make_rng(seed, 0x7ab1e);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sd = 1.0 / std::sqrt(static_cast<double>(dim));

  Vector x(dim);
  for (int k = 0; k < dim; ++k) x[k] = sd * gauss(rng);
  Matrix rows(num_states, dim);
  for (int s = 0; s < num_states; ++s)
    for (int k = 0; k < dim; ++k) rows(s, k) = common_scale * x[k] + noise_scale * sd * gauss(rng);

  EmbeddingTable table(std::move(rows));
  table.normalize_rows();
  return {std::move(table), std::move(x)};
}

EmbeddingTable init_table(int num_states, int dim, double common_scale, double noise_scale,
                          std::uint64_t seed) {
  return init_table_with_common(num_states, dim, common_scale, noise_scale, seed).table;
}

namespace {

Matrix gather_rows(const Matrix& source, std::span<const StateId> ids) {
  Matrix out(static_cast<Eigen::Index>(ids.size()), source.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = source.row(ids[i]);
  return out;
}

void check_batch(const TripletBatch& batch, int num_states) {
  if (batch.anchors.empty()) throw ConfigError("triplet batch is empty");
  if (batch.anchors.size() != batch.futures.size())
    throw ConfigError("anchors and futures differ in length");
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch.anchors[i] < 0 || batch.anchors[i] >= num_states || batch.futures[i] < 0 ||
        batch.futures[i] >= num_states)
      throw ConfigError("batch state id out of range");
  }
}

// Column (backward) or row (forward) softmax of a logit matrix, in place.
void softmax_inplace(Matrix& logits, LossDirection direction) {
  if (direction == LossDirection::Backward) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      auto col = logits.col(j);
      col.array() -= col.maxCoeff();
      col = col.array().exp().matrix();
      col /= col.sum();
    }
  } else {
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      auto row = logits.row(i);
      row.array() -= row.maxCoeff();
      row = row.array().exp().matrix();
      row /= row.sum();
    }
  }
}

}  // namespace

Matrix prob_matrix(const Matrix& anchors, const Matrix& futures, LossDirection direction) {
  Matrix p = anchors * futures.transpose();
  softmax_inplace(p, direction);
  return p;
}

Matrix prob_matrix(const EmbeddingTable& table, const TripletBatch& batch,
                   LossDirection direction) {
  check_batch(batch, table.num_states());
  return prob_matrix(gather_rows(table.vectors(), batch.anchors),
                     gather_rows(table.vectors(), batch.futures), direction);
}

Matrix infonce_descent_direction(const EmbeddingTable& table, const TripletBatch& batch,
                                 const UpdateConfig& cfg) {
  check_batch(batch, table.num_states());
  const Matrix a = gather_rows(table.vectors(), batch.anchors);
  const Matrix f = gather_rows(table.vectors(), batch.futures);
  // Work on the transpose so the backward softmax runs over contiguous rows.
  Matrix residual_t = f * a.transpose();
  softmax_inplace(residual_t, cfg.direction == LossDirection::Backward ? LossDirection::Forward
                                                                       : LossDirection::Backward);
  residual_t = -residual_t;  // (delta - p) transposed
  residual_t.diagonal().array() += 1.0;

  Matrix direction = Matrix::Zero(table.num_states(), table.dim());
  const Matrix future_grad = residual_t * a;
  for (std::size_t j = 0; j < batch.size(); ++j)
    direction.row(batch.futures[j]) += future_grad.row(static_cast<Eigen::Index>(j));
  if (!cfg.anchor_stop_gradient) {
    const Matrix anchor_grad = residual_t.transpose() * f;
    for (std::size_t i = 0; i < batch.size(); ++i)
      direction.row(batch.anchors[i]) += anchor_grad.row(static_cast<Eigen::Index>(i));
  }
  return direction;
}

void infonce_step(EmbeddingTable& table, const TripletBatch& batch, const UpdateConfig& cfg) {
  Matrix delta = infonce_descent_direction(table, batch, cfg);
  delta *= cfg.learning_rate;
  std::vector<StateId> touched;
  touched.reserve(batch.size() * 2);
  std::vector<char> seen(table.num_states(), 0);
  auto mark = [&](StateId s) {
    if (!seen[s]) {
      seen[s] = 1;
      touched.push_back(s);
    }
  };
  for (StateId s : batch.futures) mark(s);
  if (!cfg.anchor_stop_gradient)
    for (StateId s : batch.anchors) mark(s);
  table.apply_update(delta, touched, cfg.normalize);
}

double psi_similarity(const EmbeddingTable& table, StateId s, StateId g) {
  if (s < 0 || g < 0 || s >= table.num_states() || g >= table.num_states())
    throw ConfigError("state id out of range");
  return table.vectors().row(s).dot(table.vectors().row(g));
}

std::vector<double> similarity_to(const EmbeddingTable& table, const Vector& v) {
  const Vector sims = table.vectors() * v;
  return {sims.data(), sims.data() + sims.size()};
}

void pin_region(EmbeddingTable& table, const std::set<StateId>& states, const Vector& target) {
  if (std::abs(target.norm() - 1.0) > 1e-6) throw ConfigError("pin target must have unit norm");
  for (StateId s : states) table.pin(s, target);
}

ScalarSimTable ScalarSimTable::zeros(int num_states) {
  return ScalarSimTable(Matrix::Zero(num_states, num_states));
}

ScalarSimTable ScalarSimTable::from_embeddings(const EmbeddingTable& table) {
  return ScalarSimTable(table.vectors() * table.vectors().transpose());
}

Matrix scalar_prob_matrix(const ScalarSimTable& table, const TripletBatch& batch) {
  check_batch(batch, table.num_states());
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix logits(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      logits(i, j) = table.at(batch.anchors[i], batch.futures[j]);
  softmax_inplace(logits, LossDirection::Backward);
  return logits;
}

void scalar_step(ScalarSimTable& table, const TripletBatch& batch, const UpdateConfig& cfg) {
  const Matrix p = scalar_prob_matrix(table, batch);
  const auto n = static_cast<Eigen::Index>(batch.size());
  // Accumulate first so that repeated (anchor, future) pairs see the same p.
  Matrix& sims = table.sims();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sims(batch.anchors[i], batch.futures[j]) +=
          cfg.learning_rate * ((i == j ? 1.0 : 0.0) - p(i, j));
}

void save_table(const EmbeddingTable& table, const std::string& stem, std::uint64_t seed,
                long step) {
  std::string csv;
  for (int s = 0; s < table.num_states(); ++s) {
    for (int k = 0; k < table.dim(); ++k) {
      if (k) csv += ',';
      csv += io::format_double(table.vectors()(s, k));
    }
    csv += '\n';
  }
  io::write_file(stem + ".csv", csv);

  nlohmann::json meta;
  meta["num_states"] = table.num_states();
  meta["dim"] = table.dim();
  meta["seed"] = seed;
  meta["step"] = step;
  std::vector<StateId> pinned;
  for (const auto& [s, v] : table.pins()) pinned.push_back(s);
  meta["pinned_ids"] = pinned;
  io::write_file(stem + ".json", meta.dump(2) + "\n");
}

EmbeddingTable load_table(const std::string& stem, TableCheckpointMeta* meta_out) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_file(stem + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("bad table sidecar " + stem + ".json: " + e.what());
  }
  TableCheckpointMeta m;
  try {
    m.num_states = meta.at("num_states").get<int>();
    m.dim = meta.at("dim").get<int>();
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.step = meta.at("step").get<long>();
    m.pinned_ids = meta.at("pinned_ids").get<std::vector<StateId>>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("table sidecar missing fields: " + std::string(e.what()));
  }

  Matrix rows(m.num_states, m.dim);
  std::istringstream in(io::read_file(stem + ".csv"));
  std::string line;
  int s = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (s >= m.num_states) throw SchemaError("table csv has too many rows");
    const auto fields = io::split(line);
    if (static_cast<int>(fields.size()) != m.dim) throw SchemaError("table csv row has wrong width");
    for (int k = 0; k < m.dim; ++k) rows(s, k) = io::parse_double(fields[k]);
    ++s;
  }
  if (s != m.num_states) throw SchemaError("table csv has too few rows");
  EmbeddingTable table(std::move(rows));
  for (StateId id : m.pinned_ids) table.pin(id, table.row(id));
  if (meta_out) *meta_out = m;
  return table;
}

}  // namespace sgcrl
