#pragma once

// Differentiable superpixel association branch. A 9-channel map assigns each
// pixel softly to its own grid cell and the 8 surrounding cells; cell centers
// are formed from the assigned mass and mapped back per pixel. Reconstructing
// the one-hot labels and pixel coordinates from those centers gives a loss
// that rewards boundary-aligned, compact assignments.

#include <cstdint>
#include <vector>

#include "segdoctor/core/array4d.hpp"
#include "segdoctor/core/types.hpp"

namespace segdoctor {

enum class AssocNormMode {
  kSoftmax9,       // softmax over the 9 channels (default)
  kSigmoidRenorm,  // per-channel sigmoid, renormalized to sum 1
};

template <typename T>
struct AssociationMap {
  Array4D<T> weights;  // (N, 9, H, W), each pixel row on the simplex
};

// Regular grid with interval s. Cells are s x s except at the ragged
// bottom/right edge. Channel j of the association map addresses the cell at
// offset (j/3 - 1, j%3 - 1) from the pixel's own cell, clamped to the grid.
struct SuperpixelGrid {
  int h = 0, w = 0, s = 0;
  int gh = 0, gw = 0;

  SuperpixelGrid(int h, int w, int s);

  int num_cells() const { return gh * gw; }
  int cell_index(int cy, int cx) const { return cy * gw + cx; }
  int neighbor_cell(int y, int x, int j) const {
    int cy = y / s + j / 3 - 1;
    int cx = x / s + j % 3 - 1;
    cy = cy < 0 ? 0 : (cy >= gh ? gh - 1 : cy);
    cx = cx < 0 ? 0 : (cx >= gw ? gw - 1 : cx);
    return cy * gw + cx;
  }
};

template <typename T>
AssociationMap<T> normalize_associations(const Array4D<T>& logits,
                                         AssocNormMode mode);

template <typename T>
Array4D<T> normalize_associations_backward(const Array4D<T>& logits,
                                           const AssociationMap<T>& assoc,
                                           const Array4D<T>& d_weights,
                                           AssocNormMode mode);

// Two-pass soft reconstruction. Pass 1 aggregates association mass into the
// cells (coordinates over all pixels, features over valid pixels only);
// pass 2 maps each pixel to the weighted average of its 9 neighbor cell
// centers, skipping cells that received no mass. The cell-level statistics
// are kept for the backward pass.
template <typename T>
struct Reconstruction {
  Array4D<T> coords;    // (N, 2, H, W)
  Array4D<T> features;  // (N, K, H, W)

  // pass-1 cell state, indexed [n * num_cells + c]
  std::vector<T> coord_mass;     // total coordinate weight per cell
  std::vector<T> coord_center;   // [.. * 2 + d]
  std::vector<T> feat_mass;      // valid-pixel weight per cell
  std::vector<T> feat_center;    // [.. * K + k]
  // pass-2 per-pixel denominators before the epsilon clamp
  Array4D<T> coord_den;  // (N, 1, H, W)
  Array4D<T> feat_den;   // (N, 1, H, W)
};

template <typename T>
Reconstruction<T> reconstruct(const AssociationMap<T>& assoc,
                              const SuperpixelGrid& grid,
                              const Array4D<T>& pixel_features,
                              const Array4D<T>& pixel_coords,
                              const Array4D<uint8_t>* valid);

// Gradient of some scalar wrt the association weights, given its gradients
// wrt the reconstruction outputs. Pixel features and coordinates are treated
// as constants (they are labels and grid positions during training).
template <typename T>
Array4D<T> reconstruct_backward(const AssociationMap<T>& assoc,
                                const SuperpixelGrid& grid,
                                const Array4D<T>& pixel_features,
                                const Array4D<T>& pixel_coords,
                                const Array4D<uint8_t>* valid,
                                const Reconstruction<T>& recon,
                                const Array4D<T>& d_coords,
                                const Array4D<T>& d_features);

// Reconstruction quality: mean cross-entropy between the pixel's class
// vector and its reconstructed one, plus (m/s) times the mean distance
// between the pixel position and its reconstructed position. Both means run
// over valid pixels.
template <typename T>
struct SuperpixelLossResult {
  T value = 0;
  T ce_term = 0;            // mean cross-entropy
  T compactness_term = 0;   // (m/s) * mean coordinate distance
  int64_t valid_pixels = 0;
  Array4D<T> d_recon_features;  // d value / d reconstructed features
  Array4D<T> d_recon_coords;    // d value / d reconstructed coords
};

template <typename T>
SuperpixelLossResult<T> superpixel_loss(const Array4D<T>& features,
                                        const Array4D<T>& recon_features,
                                        const Array4D<T>& coords,
                                        const Array4D<T>& recon_coords,
                                        T m, int s,
                                        const Array4D<uint8_t>& valid,
                                        bool with_grad = true);

// Composition used by the trainer and the gradient tests: association logits
// -> normalized weights -> reconstruction of one-hot labels and coordinates
// -> loss, with the full chain-rule gradient back to the logits.
template <typename T>
struct SuperpixelBranchResult {
  T value = 0;
  T ce_term = 0;
  T compactness_term = 0;
  int64_t valid_pixels = 0;
  Array4D<T> d_logits;
  AssociationMap<T> assoc;
  Reconstruction<T> recon;
};

template <typename T>
SuperpixelBranchResult<T> superpixel_branch_loss(const Array4D<T>& logits,
                                                 const LabelMap& labels, T m,
                                                 int s, AssocNormMode mode,
                                                 bool with_grad = true);

}  // namespace segdoctor
