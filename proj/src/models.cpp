// Copyright (C) 2026 The jointrank Authors
// SPDX-License-Identifier: Apache-2.0
#include "jointrank/models.hpp"

#include <array>
#include <bit>
#include <fstream>
#include <string>

#include "jointrank/errors.hpp"

namespace jointrank {

namespace {

constexpr double kInitRange = 0.1;

void check_tokens(std::span<const TokenId> tokens, Eigen::Index vocab) {
  if (tokens.empty()) throw ValidationError("empty token sequence");
  for (TokenId t : tokens) {
    if (t < 0 || t >= vocab) {
      throw ValidationError("token id " + std::to_string(t) + " outside vocabulary of " +
                            std::to_string(vocab));
    }
  }
}

template <typename Table>
Vector mean_pool(const Table& embeddings, std::span<const TokenId> tokens) {
  check_tokens(tokens, embeddings.cols());
  Vector pooled = Vector::Zero(embeddings.rows());
  for (TokenId t : tokens) pooled += embeddings.col(t);
  pooled /= static_cast<double>(tokens.size());
  return pooled;
}

template <typename Table>
void scatter_pool_grad(Table& grad_embeddings, std::span<const TokenId> tokens,
                       const Vector& d_pooled) {
  const double scale = 1.0 / static_cast<double>(tokens.size());
  for (TokenId t : tokens) grad_embeddings.col(t) += scale * d_pooled;
}

struct TowerTrace {
  Vector pooled;
  Vector hidden;
  Vector out;
};

TowerTrace forward(const ConstTower& tower, std::span<const TokenId> tokens) {
  TowerTrace trace;
  trace.pooled = mean_pool(tower.embeddings, tokens);
  trace.hidden = (tower.w1 * trace.pooled + tower.b1).array().tanh();
  trace.out = tower.w2 * trace.hidden + tower.b2;
  return trace;
}

void backward(const ConstTower& tower, std::span<const TokenId> tokens, const TowerTrace& trace,
              const Vector& d_out, MutableTower& grad) {
  grad.w2.noalias() += d_out * trace.hidden.transpose();
  grad.b2 += d_out;
  const Vector d_pre =
      (tower.w2.transpose() * d_out).cwiseProduct((1.0 - trace.hidden.array().square()).matrix());
  grad.w1.noalias() += d_pre * trace.pooled.transpose();
  grad.b1 += d_pre;
  scatter_pool_grad(grad.embeddings, tokens, tower.w1.transpose() * d_pre);
}

struct CrossTrace {
  Vector query_pool;
  Vector passage_pool;
  Vector features;
  Vector hidden;
  double score = 0.0;
};

CrossTrace forward(const CrossEncoder& model, std::span<const TokenId> query,
                   std::span<const TokenId> passage) {
  const auto e = model.dims().emb_dim;
  CrossTrace trace;
  trace.query_pool = mean_pool(model.embeddings(), query);
  trace.passage_pool = mean_pool(model.embeddings(), passage);
  trace.features.resize(3 * e);
  trace.features << trace.query_pool, trace.passage_pool,
      trace.query_pool.cwiseProduct(trace.passage_pool);
  trace.hidden = (model.w1() * trace.features + model.b1()).array().tanh();
  trace.score = model.w2().dot(trace.hidden) + model.b2();
  return trace;
}

void check_upstream(Batch batch, const Eigen::Ref<const Vector>& upstream) {
  if (static_cast<std::size_t>(upstream.size()) != score_count(batch)) {
    throw UsageError("upstream gradient count " + std::to_string(upstream.size()) +
                     " does not match score count " + std::to_string(score_count(batch)));
  }
}

}  // namespace

void ModelDims::validate() const {
  if (vocab_size <= 0 || emb_dim <= 0 || hidden_dim <= 0 || out_dim <= 0) {
    throw UsageError("model dimensions must be positive");
  }
}

std::size_t score_count(Batch batch) {
  std::size_t n = 0;
  for (const ScoredList& list : batch) n += list.candidates.size();
  return n;
}

// ---------------------------------------------------------------------------
// Dual encoder

Eigen::Index DualEncoder::tower_size(const ModelDims& dims) {
  return dims.emb_dim * dims.vocab_size + dims.hidden_dim * dims.emb_dim + dims.hidden_dim +
         dims.out_dim * dims.hidden_dim + dims.out_dim;
}

Eigen::Index DualEncoder::parameter_count(const ModelDims& dims) { return 2 * tower_size(dims); }

DualEncoder::DualEncoder(const ModelDims& dims)
    : DualEncoder(dims, Vector::Zero(parameter_count(dims))) {}

DualEncoder::DualEncoder(const ModelDims& dims, Vector parameters)
    : dims_(dims), theta_(std::move(parameters)) {
  dims_.validate();
  if (theta_.size() != parameter_count(dims_)) {
    throw UsageError("dual encoder: expected " + std::to_string(parameter_count(dims_)) +
                     " parameters, got " + std::to_string(theta_.size()));
  }
}

DualEncoder DualEncoder::random(const ModelDims& dims, SeededRng& rng) {
  DualEncoder model(dims);
  for (double* base : {model.theta_.data(), model.theta_.data() + tower_size(dims)}) {
    auto tower = tower_view<false>(base, dims);
    rng.fill_uniform(tower.embeddings, -kInitRange, kInitRange);
    rng.fill_uniform(tower.w1, -kInitRange, kInitRange);
    rng.fill_uniform(tower.w2, -kInitRange, kInitRange);
  }
  return model;
}

ConstTower DualEncoder::query_tower() const { return tower_view<true>(theta_.data(), dims_); }

ConstTower DualEncoder::passage_tower() const {
  return tower_view<true>(theta_.data() + tower_size(dims_), dims_);
}

Vector DualEncoder::encode_query(std::span<const TokenId> tokens) const {
  return encode(query_tower(), tokens);
}

Vector DualEncoder::encode_passage(std::span<const TokenId> tokens) const {
  return encode(passage_tower(), tokens);
}

Vector encode(const ConstTower& tower, std::span<const TokenId> tokens) {
  return forward(tower, tokens).out;
}

double score_de(const Eigen::Ref<const Vector>& query_emb,
                const Eigen::Ref<const Vector>& passage_emb) {
  if (query_emb.size() != passage_emb.size()) {
    throw UsageError("score_de: embedding lengths differ");
  }
  return query_emb.dot(passage_emb);
}

Vector score_batch(const DualEncoder& model, Batch batch) {
  Vector scores(static_cast<Eigen::Index>(score_count(batch)));
  Eigen::Index k = 0;
  for (const ScoredList& list : batch) {
    const Vector q = model.encode_query(list.query);
    for (auto candidate : list.candidates) scores[k++] = q.dot(model.encode_passage(candidate));
  }
  return scores;
}

Vector grad_de(const DualEncoder& model, Batch batch, const Eigen::Ref<const Vector>& upstream) {
  check_upstream(batch, upstream);
  const ModelDims& dims = model.dims();
  Vector grad = Vector::Zero(model.parameters().size());
  MutableTower grad_query = tower_view<false>(grad.data(), dims);
  MutableTower grad_passage = tower_view<false>(grad.data() + DualEncoder::tower_size(dims), dims);
  const ConstTower query_tower = model.query_tower();
  const ConstTower passage_tower = model.passage_tower();

  Eigen::Index k = 0;
  for (const ScoredList& list : batch) {
    const TowerTrace q = forward(query_tower, list.query);
    Vector d_query = Vector::Zero(dims.out_dim);
    for (auto candidate : list.candidates) {
      const double u = upstream[k++];
      if (u == 0.0) continue;
      const TowerTrace p = forward(passage_tower, candidate);
      d_query += u * p.out;
      backward(passage_tower, candidate, p, u * q.out, grad_passage);
    }
    backward(query_tower, list.query, q, d_query, grad_query);
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Cross encoder

Eigen::Index CrossEncoder::parameter_count(const ModelDims& dims) {
  return dims.emb_dim * dims.vocab_size + dims.hidden_dim * 3 * dims.emb_dim +
         2 * dims.hidden_dim + 1;
}

CrossEncoder::CrossEncoder(const ModelDims& dims)
    : CrossEncoder(dims, Vector::Zero(parameter_count(dims))) {}

CrossEncoder::CrossEncoder(const ModelDims& dims, Vector parameters)
    : dims_(dims), theta_(std::move(parameters)) {
  dims_.validate();
  if (theta_.size() != parameter_count(dims_)) {
    throw UsageError("cross encoder: expected " + std::to_string(parameter_count(dims_)) +
                     " parameters, got " + std::to_string(theta_.size()));
  }
}

CrossEncoder CrossEncoder::random(const ModelDims& dims, SeededRng& rng) {
  CrossEncoder model(dims);
  const auto e = dims.emb_dim, h = dims.hidden_dim;
  const auto v = static_cast<Eigen::Index>(dims.vocab_size);
  double* p = model.theta_.data();
  rng.fill_uniform(Eigen::Map<Matrix>(p, e, v), -kInitRange, kInitRange);
  p += e * v;
  rng.fill_uniform(Eigen::Map<Matrix>(p, h, 3 * e), -kInitRange, kInitRange);
  p += h * 3 * e + h;
  rng.fill_uniform(Eigen::Map<Matrix>(p, h, 1), -kInitRange, kInitRange);
  return model;
}

Eigen::Map<const Matrix> CrossEncoder::embeddings() const {
  return {theta_.data(), dims_.emb_dim, dims_.vocab_size};
}

Eigen::Map<const Matrix> CrossEncoder::w1() const {
  return {theta_.data() + dims_.emb_dim * dims_.vocab_size, dims_.hidden_dim, 3 * dims_.emb_dim};
}

Eigen::Map<const Vector> CrossEncoder::b1() const {
  return {w1().data() + w1().size(), dims_.hidden_dim};
}

Eigen::Map<const Vector> CrossEncoder::w2() const {
  return {b1().data() + dims_.hidden_dim, dims_.hidden_dim};
}

double CrossEncoder::b2() const { return theta_[theta_.size() - 1]; }

double score_ce(const CrossEncoder& model, std::span<const TokenId> query,
                std::span<const TokenId> passage) {
  return forward(model, query, passage).score;
}

Vector score_batch(const CrossEncoder& model, Batch batch) {
  Vector scores(static_cast<Eigen::Index>(score_count(batch)));
  Eigen::Index k = 0;
  for (const ScoredList& list : batch) {
    for (auto candidate : list.candidates) scores[k++] = score_ce(model, list.query, candidate);
  }
  return scores;
}

Vector grad_ce(const CrossEncoder& model, Batch batch, const Eigen::Ref<const Vector>& upstream) {
  check_upstream(batch, upstream);
  const auto e = model.dims().emb_dim, h = model.dims().hidden_dim;
  const auto v = static_cast<Eigen::Index>(model.dims().vocab_size);
  Vector grad = Vector::Zero(model.parameters().size());
  double* p = grad.data();
  Eigen::Map<Matrix> g_embeddings(p, e, v);
  Eigen::Map<Matrix> g_w1(p + e * v, h, 3 * e);
  Eigen::Map<Vector> g_b1(g_w1.data() + g_w1.size(), h);
  Eigen::Map<Vector> g_w2(g_b1.data() + h, h);
  double& g_b2 = grad[grad.size() - 1];

  Eigen::Index k = 0;
  for (const ScoredList& list : batch) {
    for (auto candidate : list.candidates) {
      const double u = upstream[k++];
      if (u == 0.0) continue;
      const CrossTrace t = forward(model, list.query, candidate);
      g_w2 += u * t.hidden;
      g_b2 += u;
      const Vector d_pre =
          (u * model.w2()).cwiseProduct((1.0 - t.hidden.array().square()).matrix());
      g_w1.noalias() += d_pre * t.features.transpose();
      g_b1 += d_pre;
      const Vector d_features = model.w1().transpose() * d_pre;
      const Vector d_query =
          d_features.segment(0, e) + d_features.segment(2 * e, e).cwiseProduct(t.passage_pool);
      const Vector d_passage =
          d_features.segment(e, e) + d_features.segment(2 * e, e).cwiseProduct(t.query_pool);
      scatter_pool_grad(g_embeddings, list.query, d_query);
      scatter_pool_grad(g_embeddings, candidate, d_passage);
    }
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr std::array<char, 4> kMagic{'J', 'R', 'C', 'K'};
constexpr std::uint32_t kKindDual = 1;
constexpr std::uint32_t kKindCross = 2;

template <typename UInt>
void put_le(std::ostream& out, UInt value) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.put(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename UInt>
UInt get_le(std::istream& in) {
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    const int byte = in.get();
    if (byte == std::char_traits<char>::eof()) throw ValidationError("checkpoint truncated");
    value |= static_cast<UInt>(static_cast<unsigned char>(byte)) << (8 * i);
  }
  return value;
}

void write_checkpoint(const std::filesystem::path& path, std::uint32_t kind,
                      const ModelDims& dims, const Vector& theta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, kind);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dims.vocab_size));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dims.emb_dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dims.hidden_dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(dims.out_dim));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(theta.size()));
  for (double x : theta) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  if (!out) throw ValidationError("failed writing " + path.string());
}

std::pair<ModelDims, Vector> read_checkpoint(const std::filesystem::path& path,
                                             std::uint32_t expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ValidationError(path.string() + ": not a checkpoint");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(version));
  }
  if (get_le<std::uint32_t>(in) != expected_kind) {
    throw ValidationError(path.string() + ": checkpoint holds the other model kind");
  }
  ModelDims dims;
  dims.vocab_size = static_cast<std::int32_t>(get_le<std::uint64_t>(in));
  dims.emb_dim = static_cast<Eigen::Index>(get_le<std::uint64_t>(in));
  dims.hidden_dim = static_cast<Eigen::Index>(get_le<std::uint64_t>(in));
  dims.out_dim = static_cast<Eigen::Index>(get_le<std::uint64_t>(in));
  const auto count = static_cast<Eigen::Index>(get_le<std::uint64_t>(in));
  Vector theta(count);
  for (Eigen::Index i = 0; i < count; ++i) {
    theta[i] = std::bit_cast<double>(get_le<std::uint64_t>(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError(path.string() + ": trailing bytes after parameters");
  }
  return {dims, std::move(theta)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const DualEncoder& model) {
  write_checkpoint(path, kKindDual, model.dims(), model.parameters());
}

void save_checkpoint(const std::filesystem::path& path, const CrossEncoder& model) {
  ModelDims dims = model.dims();
  write_checkpoint(path, kKindCross, dims, model.parameters());
}

DualEncoder load_dual_encoder(const std::filesystem::path& path) {
  auto [dims, theta] = read_checkpoint(path, kKindDual);
  return DualEncoder(dims, std::move(theta));
}

CrossEncoder load_cross_encoder(const std::filesystem::path& path) {
  auto [dims, theta] = read_checkpoint(path, kKindCross);
  return CrossEncoder(dims, std::move(theta));
}

}  // namespace jointrank
