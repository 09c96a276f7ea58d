#include "crpt/metrics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <cmath>
#include <numeric>

#include "crpt/error.hpp"
#include "crpt/rng.hpp"

namespace crpt::metrics {

namespace {
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const MatRM>;
}  // namespace

CoverageReport coverage(const proto::PrototypeBank& bank, int k) {
  const std::size_t m = bank.count();
  if (k < 1 || m <= static_cast<std::size_t>(k))
    raise(Errc::TooFewPrototypes, "coverage needs more prototypes than k");
  nd::Tensor cos = nd::matmul_nt(bank.normalized(), bank.normalized());

  double ane_sum = 0.0;
  double kne_sum = 0.0;
  std::vector<double> others;
  others.reserve(m - 1);
  for (std::size_t j = 0; j < m; ++j) {
    others.clear();
    for (std::size_t l = 0; l < m; ++l) {
      if (l == j) continue;
      ane_sum += cos.at(j, l);
      others.push_back(cos.at(j, l));
    }
    std::nth_element(others.begin(), others.begin() + (k - 1), others.end(),
                     std::greater<double>());
    kne_sum += others[static_cast<std::size_t>(k - 1)];
  }
  CoverageReport rep;
  rep.ane = ane_sum / static_cast<double>(m * (m - 1));
  rep.kne = kne_sum / static_cast<double>(m);
  rep.k = k;
  return rep;
}

PcaResult pca(const nd::Tensor& rows, std::size_t components) {
  if (rows.ndim() != 2) raise(Errc::ShapeMismatch, "pca expects a matrix of row samples");
  const std::size_t n = rows.rows(), dim = rows.cols();
  if (components == 0) raise(Errc::ConfigInvalid, "pca needs at least one component");
  if (n <= components) raise(Errc::InsufficientData, "pca needs more samples than components");

  MatRM x = MapC(rows.data.data(), n, dim);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  const double total_var = x.squaredNorm() / static_cast<double>(n);

  // Eigen-decompose whichever of X^T X / n and X X^T / n is smaller.
  Eigen::VectorXd evals;
  MatRM directions;  // {dim, r} columns are unit principal axes
  if (dim <= n) {
    Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    const std::size_t r = dim;
    evals.resize(r);
    directions.resize(dim, r);
    for (std::size_t i = 0; i < r; ++i) {  // descending
      evals[static_cast<Eigen::Index>(i)] = es.eigenvalues()[static_cast<Eigen::Index>(r - 1 - i)];
      directions.col(static_cast<Eigen::Index>(i)) =
          es.eigenvectors().col(static_cast<Eigen::Index>(r - 1 - i));
    }
  } else {
    Eigen::MatrixXd gram = (x * x.transpose()) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    const std::size_t r = n;
    evals.resize(r);
    directions.resize(dim, r);
    for (std::size_t i = 0; i < r; ++i) {
      const auto col = static_cast<Eigen::Index>(r - 1 - i);
      const double lam = es.eigenvalues()[col];
      evals[static_cast<Eigen::Index>(i)] = lam;
      if (lam > 0.0)
        directions.col(static_cast<Eigen::Index>(i)) =
            x.transpose() * es.eigenvectors().col(col) / std::sqrt(lam * n);
      else
        directions.col(static_cast<Eigen::Index>(i)).setZero();
    }
  }

  const double tol = 1e-12 * std::max(1.0, evals.size() ? evals[0] : 0.0);
  std::size_t rank = 0;
  while (rank < static_cast<std::size_t>(evals.size()) &&
         evals[static_cast<Eigen::Index>(rank)] > tol)
    ++rank;
  if (rank < components)
    raise(Errc::RankDeficient, "covariance rank " + std::to_string(rank) + " < " +
                                   std::to_string(components) + " components");

  PcaResult out;
  out.projections = nd::Tensor({n, components});
  MatRM proj = x * directions.leftCols(static_cast<Eigen::Index>(components));
  std::copy(proj.data(), proj.data() + proj.size(), out.projections.data.begin());
  out.variance_ratio.resize(components);
  for (std::size_t i = 0; i < components; ++i)
    out.variance_ratio[i] = evals[static_cast<Eigen::Index>(i)] / total_var;
  return out;
}

PcaResult pca_project(const nd::Tensor& frames, const proto::EncoderStack& stack,
                      std::size_t components) {
  return pca(stack.encode(frames), components);
}

double ridge_probe(const nd::Tensor& x, const nd::Tensor& y, std::uint64_t split_seed,
                   double lambda) {
  if (x.ndim() != 2 || y.ndim() != 2 || x.rows() != y.rows())
    raise(Errc::ShapeMismatch, "ridge_probe: X and Y row counts must agree");
  const std::size_t n = x.rows();
  if (n < 5) raise(Errc::InsufficientData, "ridge_probe needs at least 5 samples");

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(split_seed, "probe-split"));
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
  const std::size_t n_train = std::max<std::size_t>(1, (n * 4) / 5);
  const std::size_t n_test = n - n_train;

  const std::size_t p = x.cols(), t = y.cols();
  Eigen::MatrixXd xt(n_train, p), yt(n_train, t);
  for (std::size_t i = 0; i < n_train; ++i) {
    for (std::size_t j = 0; j < p; ++j) xt(i, j) = x.at(idx[i], j);
    for (std::size_t j = 0; j < t; ++j) yt(i, j) = y.at(idx[i], j);
  }
  const Eigen::RowVectorXd xm = xt.colwise().mean();
  const Eigen::RowVectorXd ym = yt.colwise().mean();
  xt.rowwise() -= xm;
  yt.rowwise() -= ym;

  Eigen::MatrixXd gram = xt.transpose() * xt;
  gram.diagonal().array() += lambda;
  const Eigen::MatrixXd w = gram.ldlt().solve(xt.transpose() * yt);

  double se = 0.0;
  for (std::size_t i = 0; i < n_test; ++i) {
    const std::size_t r = idx[n_train + i];
    Eigen::RowVectorXd xv(p);
    for (std::size_t j = 0; j < p; ++j) xv(static_cast<Eigen::Index>(j)) = x.at(r, j);
    const Eigen::RowVectorXd pred = (xv - xm) * w + ym;
    for (std::size_t j = 0; j < t; ++j) {
      const double d = pred(static_cast<Eigen::Index>(j)) - y.at(r, j);
      se += d * d;
    }
  }
  return se / static_cast<double>(n_test * t);
}

void write_coverage_csv(const proto::PrototypeBank& bank, int k, const std::string& path) {
  CoverageReport rep = coverage(bank, k);
  std::ofstream os(path, std::ios::trunc);
  if (!os) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  char line[96];
  std::snprintf(line, sizeof(line), "ane,kne,k\n%.10g,%.10g,%d\n", rep.ane, rep.kne, rep.k);
  os << line;
  if (!os) raise(Errc::IoError, "write failure on '" + path + "'");
}

void write_pca_csv(const std::vector<const collect::DomainBuffer*>& buffers,
                   const proto::EncoderStack& stack, std::size_t components,
                   std::size_t frames_per_domain, std::size_t stack_k, const std::string& path) {
  if (buffers.empty()) raise(Errc::InsufficientData, "no buffers for PCA");
  std::vector<std::pair<std::string, nd::Tensor>> embeddings;
  std::size_t total = 0;
  for (const collect::DomainBuffer* buf : buffers) {
    const std::size_t n = std::min<std::size_t>(frames_per_domain, buf->count());
    if (n == 0) raise(Errc::InsufficientData, "empty buffer for PCA");
    nd::Tensor batch({n, stack_k * buf->frame_c, buf->frame_h, buf->frame_w});
    const std::size_t chw = batch.numel() / n;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t idx = buf->count() * i / n;  // evenly spaced
      nd::Tensor s = collect::stack_at(*buf, idx, stack_k);
      std::copy(s.data.begin(), s.data.end(), batch.data.begin() + i * chw);
    }
    embeddings.emplace_back(buf->domain, stack.encode(batch));
    total += n;
  }
  const std::size_t repr = stack.arch().repr_dim();
  nd::Tensor all({total, repr});
  std::size_t row = 0;
  for (const auto& [domain, emb] : embeddings) {
    std::copy(emb.data.begin(), emb.data.end(), all.data.begin() + row * repr);
    row += emb.rows();
  }
  PcaResult pcar = pca(all, components);

  std::ofstream os(path, std::ios::trunc);
  if (!os) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  os << "tag,index";
  for (std::size_t c = 0; c < components; ++c) os << ",pc" << (c + 1);
  os << "\n";
  char num[48];
  row = 0;
  for (const auto& [domain, emb] : embeddings) {
    for (std::size_t i = 0; i < emb.rows(); ++i, ++row) {
      os << domain << ',' << i;
      for (std::size_t c = 0; c < components; ++c) {
        std::snprintf(num, sizeof(num), ",%.8g", pcar.projections.at(row, c));
        os << num;
      }
      os << "\n";
    }
  }
  os << "explained_variance_ratio,";  // empty index column
  for (std::size_t c = 0; c < components; ++c) {
    std::snprintf(num, sizeof(num), ",%.8g", pcar.variance_ratio[c]);
    os << num;
  }
  os << "\n";
  if (!os) raise(Errc::IoError, "write failure on '" + path + "'");
}

double linear_probe(const collect::DomainBuffer& buffer, const proto::EncoderStack& stack,
                    std::size_t stack_k, std::uint64_t split_seed, double lambda) {
  const std::size_t n = buffer.count();
  if (buffer.states.size() != n || n < 200)
    raise(Errc::InsufficientData, "linear probe needs >= 200 labeled frames");

  const std::size_t state_dim = buffer.states.front().size();
  nd::Tensor y({n, state_dim});
  for (std::size_t i = 0; i < n; ++i) {
    if (buffer.states[i].size() != state_dim)
      raise(Errc::ShapeMismatch, "ragged ground-truth states");
    for (std::size_t j = 0; j < state_dim; ++j) y.at(i, j) = buffer.states[i][j];
  }

  const std::size_t repr = stack.arch().repr_dim();
  nd::Tensor x({n, repr});
  constexpr std::size_t kChunk = 256;
  for (std::size_t base = 0; base < n; base += kChunk) {
    const std::size_t cnt = std::min(kChunk, n - base);
    nd::Tensor batch({cnt, stack_k * buffer.frame_c, buffer.frame_h, buffer.frame_w});
    const std::size_t chw = batch.numel() / cnt;
    for (std::size_t i = 0; i < cnt; ++i) {
      nd::Tensor s = collect::stack_at(buffer, base + i, stack_k);
      std::copy(s.data.begin(), s.data.end(), batch.data.begin() + i * chw);
    }
    nd::Tensor emb = stack.encode(batch);
    for (std::size_t i = 0; i < cnt; ++i)
      for (std::size_t j = 0; j < repr; ++j) x.at(base + i, j) = emb.at(i, j);
  }
  return ridge_probe(x, y, split_seed, lambda);
}

}  // namespace crpt::metrics
