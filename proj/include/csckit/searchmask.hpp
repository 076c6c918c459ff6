#pragma once

#include <span>
#include <vector>

#include "csckit/charkb.hpp"
#include "csckit/types.hpp"

namespace csc {

// One row of the search matrix: a length-vocab binary mask. Stored packed
// (one bit per vocab entry) with a dedicated all-ones representation for the
// unmasked branch; materialized to a dense vector only on demand.
class MaskVector {
 public:
  static MaskVector all_ones(int size);
  // `members` must be nonempty (every confusion set contains its owner).
  static MaskVector from_members(int size, std::span<const int> members);

  int size() const { return size_; }
  bool is_all_ones() const { return all_ones_; }
  bool test(int j) const;
  int count() const;
  Vector dense() const;

  friend bool operator==(const MaskVector& a, const MaskVector& b);

 private:
  int size_ = 0;
  bool all_ones_ = false;
  std::vector<std::uint64_t> words_;
};

// The per-sentence constraint matrix: one mask row per position.
struct SearchMatrix {
  std::vector<MaskVector> rows;

  int length() const { return static_cast<int>(rows.size()); }
  static SearchMatrix all_ones(int length, int vocab);
};

// Branch rule for one position: detected phonological errors are restricted
// to the phonological set of the source character, detected visual errors to
// the visual set, everything else is unconstrained.
MaskVector mask_vector(int x_index, int y_d, int y_r, const ConfusionIndex& index);

// Row-wise composition over a sentence. All spans must share one length.
SearchMatrix build_search_matrix(std::span<const int> x_indices, std::span<const int> y_d,
                                 std::span<const int> y_r, const ConfusionIndex& index);

// Elementwise product of probabilities and mask rows. With `renormalize`,
// each row is divided by max(row sum, kMaskEpsilon); without it, the raw
// product is returned (row argmax is unaffected whenever the masked sum
// exceeds the epsilon).
inline constexpr double kMaskEpsilon = 1e-12;
Matrix apply_mask(const Matrix& probs, const SearchMatrix& mask, bool renormalize);

// Gradient of apply_mask with respect to `probs`, the mask held constant.
Matrix apply_mask_backward(const Matrix& probs, const SearchMatrix& mask, bool renormalize,
                           const Matrix& upstream);

// Argmax with ties broken toward the lower index.
int argmax_row(const Matrix& m, int row);

}  // namespace csc
