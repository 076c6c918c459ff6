#include "csckit/searchmask.hpp"

#include <algorithm>
#include <bit>

#include "csckit/error.hpp"

namespace csc {

namespace {

int word_count(int size) { return (size + 63) / 64; }

}  // namespace

MaskVector MaskVector::all_ones(int size) {
  if (size <= 0) throw ShapeError("mask size must be positive, got " + std::to_string(size));
  MaskVector m;
  m.size_ = size;
  m.all_ones_ = true;
  return m;
}

MaskVector MaskVector::from_members(int size, std::span<const int> members) {
  if (size <= 0) throw ShapeError("mask size must be positive, got " + std::to_string(size));
  if (members.empty()) throw ShapeError("mask must keep at least one candidate");
  MaskVector m;
  m.size_ = size;
  m.words_.assign(static_cast<std::size_t>(word_count(size)), 0);
  for (int j : members) {
    if (j < 0 || j >= size)
      throw ShapeError("mask member " + std::to_string(j) + " out of range [0, " +
                       std::to_string(size) + ")");
    m.words_[static_cast<std::size_t>(j) / 64] |= std::uint64_t{1} << (j % 64);
  }
  return m;
}

bool MaskVector::test(int j) const {
  if (j < 0 || j >= size_)
    throw ShapeError("mask index " + std::to_string(j) + " out of range [0, " +
                     std::to_string(size_) + ")");
  if (all_ones_) return true;
  return (words_[static_cast<std::size_t>(j) / 64] >> (j % 64)) & 1;
}

int MaskVector::count() const {
  if (all_ones_) return size_;
  int n = 0;
  for (std::uint64_t w : words_) n += std::popcount(w);
  return n;
}

Vector MaskVector::dense() const {
  Vector v(size_);
  for (int j = 0; j < size_; ++j) v(j) = test(j) ? 1.0 : 0.0;
  return v;
}

bool operator==(const MaskVector& a, const MaskVector& b) {
  if (a.size_ != b.size_) return false;
  if (a.all_ones_ && b.all_ones_) return true;
  for (int j = 0; j < a.size_; ++j)
    if (a.test(j) != b.test(j)) return false;
  return true;
}

SearchMatrix SearchMatrix::all_ones(int length, int vocab) {
  SearchMatrix m;
  m.rows.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) m.rows.push_back(MaskVector::all_ones(vocab));
  return m;
}

MaskVector mask_vector(int x_index, int y_d, int y_r, const ConfusionIndex& index) {
  const int vocab = static_cast<int>(index.phonological.size());
  if (x_index < 0 || x_index >= vocab)
    throw VocabError("character index " + std::to_string(x_index) + " out of range [0, " +
                     std::to_string(vocab) + ")");
  if (y_d != 0 && y_d != 1)
    throw ShapeError("detection label must be 0 or 1, got " + std::to_string(y_d));
  if (y_r != 0 && y_r != 1)
    throw ShapeError("reasoning label must be 0 or 1, got " + std::to_string(y_r));
  if (y_d == 0) return MaskVector::all_ones(vocab);
  const std::vector<int>& members = y_r == 1 ? index.pc(x_index) : index.vc(x_index);
  return MaskVector::from_members(vocab, members);
}

SearchMatrix build_search_matrix(std::span<const int> x_indices, std::span<const int> y_d,
                                 std::span<const int> y_r, const ConfusionIndex& index) {
  if (x_indices.size() != y_d.size() || x_indices.size() != y_r.size())
    throw ShapeError("search matrix inputs disagree on length: chars " +
                     std::to_string(x_indices.size()) + ", detection " +
                     std::to_string(y_d.size()) + ", reasoning " + std::to_string(y_r.size()));
  SearchMatrix m;
  m.rows.reserve(x_indices.size());
  for (std::size_t i = 0; i < x_indices.size(); ++i)
    m.rows.push_back(mask_vector(x_indices[i], y_d[i], y_r[i], index));
  return m;
}

Matrix apply_mask(const Matrix& probs, const SearchMatrix& mask, bool renormalize) {
  if (probs.rows() != mask.length())
    throw ShapeError("probability matrix has " + std::to_string(probs.rows()) +
                     " rows but mask has " + std::to_string(mask.length()));
  const int cols = static_cast<int>(probs.cols());
  Matrix out(probs.rows(), cols);
  for (int i = 0; i < probs.rows(); ++i) {
    const MaskVector& row = mask.rows[static_cast<std::size_t>(i)];
    if (row.size() != cols)
      throw ShapeError("mask row " + std::to_string(i) + " has size " +
                       std::to_string(row.size()) + " but probabilities have " +
                       std::to_string(cols) + " columns");
    for (int j = 0; j < cols; ++j) out(i, j) = row.test(j) ? probs(i, j) : 0.0;
    if (renormalize) {
      // Sequential accumulation keeps the sum bit-identical to a plain
      // left-to-right loop over the dense product.
      Scalar s = 0.0;
      for (int j = 0; j < cols; ++j) s += out(i, j);
      const Scalar denom = std::max(s, static_cast<Scalar>(kMaskEpsilon));
      for (int j = 0; j < cols; ++j) out(i, j) /= denom;
    }
  }
  return out;
}

Matrix apply_mask_backward(const Matrix& probs, const SearchMatrix& mask, bool renormalize,
                           const Matrix& upstream) {
  if (upstream.rows() != probs.rows() || upstream.cols() != probs.cols())
    throw ShapeError("upstream gradient shape mismatch");
  if (probs.rows() != mask.length())
    throw ShapeError("probability matrix has " + std::to_string(probs.rows()) +
                     " rows but mask has " + std::to_string(mask.length()));
  const int cols = static_cast<int>(probs.cols());
  Matrix grad = Matrix::Zero(probs.rows(), cols);
  for (int i = 0; i < probs.rows(); ++i) {
    const MaskVector& row = mask.rows[static_cast<std::size_t>(i)];
    if (!renormalize) {
      for (int j = 0; j < cols; ++j)
        if (row.test(j)) grad(i, j) = upstream(i, j);
      continue;
    }
    Scalar s = 0.0;
    for (int j = 0; j < cols; ++j)
      if (row.test(j)) s += probs(i, j);
    if (s > kMaskEpsilon) {
      // out_j = m_j p_j / s with s = sum_k m_k p_k: quotient rule.
      Scalar dot = 0.0;
      for (int j = 0; j < cols; ++j)
        if (row.test(j)) dot += upstream(i, j) * probs(i, j);
      dot /= s;
      for (int j = 0; j < cols; ++j)
        if (row.test(j)) grad(i, j) = (upstream(i, j) - dot) / s;
    } else {
      // Denominator clamped to the epsilon floor: constant w.r.t. probs.
      for (int j = 0; j < cols; ++j)
        if (row.test(j)) grad(i, j) = upstream(i, j) / kMaskEpsilon;
    }
  }
  return grad;
}

int argmax_row(const Matrix& m, int row) {
  if (row < 0 || row >= m.rows())
    throw ShapeError("row " + std::to_string(row) + " out of range [0, " +
                     std::to_string(m.rows()) + ")");
  int best = 0;
  for (int j = 1; j < m.cols(); ++j)
    if (m(row, j) > m(row, best)) best = j;
  return best;
}

}  // namespace csc
