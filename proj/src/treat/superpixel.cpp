#include "segdoctor/treat/superpixel.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "segdoctor/core/errors.hpp"
#include "segdoctor/core/label_ops.hpp"

namespace segdoctor {

SuperpixelGrid::SuperpixelGrid(int h_, int w_, int s_) : h(h_), w(w_), s(s_) {
  check(h >= 1 && w >= 1, "SuperpixelGrid: image extent must be >= 1");
  check(s >= 1, "SuperpixelGrid: sampling interval must be >= 1");
  gh = (h + s - 1) / s;
  gw = (w + s - 1) / s;
}

template <typename T>
AssociationMap<T> normalize_associations(const Array4D<T>& logits,
                                         AssocNormMode mode) {
  check(logits.c() == 9, "normalize_associations: expected 9 channels, got " +
                             std::to_string(logits.c()));
  const int N = logits.n(), H = logits.h(), W = logits.w();
  AssociationMap<T> out{Array4D<T>(N, 9, H, W)};
  double v[9];
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (mode == AssocNormMode::kSoftmax9) {
          double mx = logits(n, 0, y, x);
          for (int j = 1; j < 9; ++j)
            mx = std::max(mx, static_cast<double>(logits(n, j, y, x)));
          double sum = 0;
          for (int j = 0; j < 9; ++j) {
            v[j] = std::exp(static_cast<double>(logits(n, j, y, x)) - mx);
            sum += v[j];
          }
          for (int j = 0; j < 9; ++j)
            out.weights(n, j, y, x) = static_cast<T>(v[j] / sum);
        } else {
          double sum = 0;
          for (int j = 0; j < 9; ++j) {
            v[j] = 1.0 / (1.0 + std::exp(-static_cast<double>(logits(n, j, y, x))));
            sum += v[j];
          }
          if (sum < kNormEps) {
            // all gates shut: fall back to uniform so rows stay on the simplex
            for (int j = 0; j < 9; ++j)
              out.weights(n, j, y, x) = static_cast<T>(1.0 / 9.0);
          } else {
            for (int j = 0; j < 9; ++j)
              out.weights(n, j, y, x) = static_cast<T>(v[j] / sum);
          }
        }
      }
  return out;
}

template <typename T>
Array4D<T> normalize_associations_backward(const Array4D<T>& logits,
                                           const AssociationMap<T>& assoc,
                                           const Array4D<T>& d_weights,
                                           AssocNormMode mode) {
  const int N = logits.n(), H = logits.h(), W = logits.w();
  check(assoc.weights.same_shape(logits) && d_weights.same_shape(logits),
        "normalize_associations_backward: shape mismatch");
  Array4D<T> dl(N, 9, H, W);
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (mode == AssocNormMode::kSoftmax9) {
          double dotwd = 0;
          for (int j = 0; j < 9; ++j)
            dotwd += static_cast<double>(assoc.weights(n, j, y, x)) *
                     static_cast<double>(d_weights(n, j, y, x));
          for (int j = 0; j < 9; ++j)
            dl(n, j, y, x) = static_cast<T>(
                static_cast<double>(assoc.weights(n, j, y, x)) *
                (static_cast<double>(d_weights(n, j, y, x)) - dotwd));
        } else {
          double sig[9], sum = 0;
          for (int j = 0; j < 9; ++j) {
            sig[j] =
                1.0 / (1.0 + std::exp(-static_cast<double>(logits(n, j, y, x))));
            sum += sig[j];
          }
          if (sum < kNormEps) {
            // uniform fallback is constant in the logits
            for (int j = 0; j < 9; ++j) dl(n, j, y, x) = T(0);
          } else {
            double dotwd = 0;
            for (int j = 0; j < 9; ++j)
              dotwd += sig[j] / sum * static_cast<double>(d_weights(n, j, y, x));
            for (int j = 0; j < 9; ++j) {
              const double dsig =
                  (static_cast<double>(d_weights(n, j, y, x)) - dotwd) / sum;
              dl(n, j, y, x) = static_cast<T>(dsig * sig[j] * (1.0 - sig[j]));
            }
          }
        }
      }
  return dl;
}

template <typename T>
Reconstruction<T> reconstruct(const AssociationMap<T>& assoc,
                              const SuperpixelGrid& grid,
                              const Array4D<T>& pixel_features,
                              const Array4D<T>& pixel_coords,
                              const Array4D<uint8_t>* valid) {
  const auto& w = assoc.weights;
  const int N = w.n(), H = w.h(), W = w.w();
  const int K = pixel_features.c();
  check(w.c() == 9, "reconstruct: association map must have 9 channels");
  check(H == grid.h && W == grid.w, "reconstruct: grid does not match image");
  check(pixel_features.n() == N && pixel_features.h() == H &&
            pixel_features.w() == W,
        "reconstruct: feature shape mismatch");
  check(pixel_coords.n() == N && pixel_coords.c() == 2 &&
            pixel_coords.h() == H && pixel_coords.w() == W,
        "reconstruct: coordinate field must be (N,2,H,W)");
  if (valid)
    check(valid->n() == N && valid->c() == 1 && valid->h() == H &&
              valid->w() == W,
          "reconstruct: validity mask must be (N,1,H,W)");

  const int C = grid.num_cells();
  Reconstruction<T> out;
  out.coords = Array4D<T>(N, 2, H, W, T(0));
  out.features = Array4D<T>(N, K, H, W, T(0));
  out.coord_mass.assign(static_cast<size_t>(N) * C, T(0));
  out.coord_center.assign(static_cast<size_t>(N) * C * 2, T(0));
  out.feat_mass.assign(static_cast<size_t>(N) * C, T(0));
  out.feat_center.assign(static_cast<size_t>(N) * C * K, T(0));
  out.coord_den = Array4D<T>(N, 1, H, W, T(0));
  out.feat_den = Array4D<T>(N, 1, H, W, T(0));

  std::vector<double> A(C), Sx(static_cast<size_t>(C) * 2);
  std::vector<double> B(C), Sf(static_cast<size_t>(C) * K);
  for (int n = 0; n < N; ++n) {
    std::fill(A.begin(), A.end(), 0.0);
    std::fill(Sx.begin(), Sx.end(), 0.0);
    std::fill(B.begin(), B.end(), 0.0);
    std::fill(Sf.begin(), Sf.end(), 0.0);

    // pass 1: pour association mass into the cells
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool ok = !valid || (*valid)(n, 0, y, x);
        for (int j = 0; j < 9; ++j) {
          const int c = grid.neighbor_cell(y, x, j);
          const double wv = w(n, j, y, x);
          A[c] += wv;
          Sx[c * 2 + 0] += wv * pixel_coords(n, 0, y, x);
          Sx[c * 2 + 1] += wv * pixel_coords(n, 1, y, x);
          if (ok) {
            B[c] += wv;
            for (int k = 0; k < K; ++k)
              Sf[static_cast<size_t>(c) * K + k] +=
                  wv * pixel_features(n, k, y, x);
          }
        }
      }
    for (int c = 0; c < C; ++c) {
      const size_t base = static_cast<size_t>(n) * C + c;
      out.coord_mass[base] = static_cast<T>(A[c]);
      out.feat_mass[base] = static_cast<T>(B[c]);
      if (A[c] > 0) {
        out.coord_center[base * 2 + 0] = static_cast<T>(Sx[c * 2 + 0] / A[c]);
        out.coord_center[base * 2 + 1] = static_cast<T>(Sx[c * 2 + 1] / A[c]);
      }
      if (B[c] > 0)
        for (int k = 0; k < K; ++k)
          out.feat_center[base * K + k] =
              static_cast<T>(Sf[static_cast<size_t>(c) * K + k] / B[c]);
    }

    // pass 2: per pixel, average the neighbor cell centers that got mass
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double cnum0 = 0, cnum1 = 0, cden = 0, fden = 0;
        std::vector<double> fnum(K, 0.0);
        for (int j = 0; j < 9; ++j) {
          const int c = grid.neighbor_cell(y, x, j);
          const size_t base = static_cast<size_t>(n) * C + c;
          const double wv = w(n, j, y, x);
          if (out.coord_mass[base] > 0) {
            cden += wv;
            cnum0 += wv * out.coord_center[base * 2 + 0];
            cnum1 += wv * out.coord_center[base * 2 + 1];
          }
          if (out.feat_mass[base] > 0) {
            fden += wv;
            for (int k = 0; k < K; ++k)
              fnum[k] += wv * out.feat_center[base * K + k];
          }
        }
        out.coord_den(n, 0, y, x) = static_cast<T>(cden);
        out.feat_den(n, 0, y, x) = static_cast<T>(fden);
        const double cd = std::max(cden, kNormEps);
        out.coords(n, 0, y, x) = static_cast<T>(cnum0 / cd);
        out.coords(n, 1, y, x) = static_cast<T>(cnum1 / cd);
        const double fd = std::max(fden, kNormEps);
        for (int k = 0; k < K; ++k)
          out.features(n, k, y, x) = static_cast<T>(fnum[k] / fd);
      }
  }
  return out;
}

template <typename T>
Array4D<T> reconstruct_backward(const AssociationMap<T>& assoc,
                                const SuperpixelGrid& grid,
                                const Array4D<T>& pixel_features,
                                const Array4D<T>& pixel_coords,
                                const Array4D<uint8_t>* valid,
                                const Reconstruction<T>& recon,
                                const Array4D<T>& d_coords,
                                const Array4D<T>& d_features) {
  const auto& w = assoc.weights;
  const int N = w.n(), H = w.h(), W = w.w();
  const int K = pixel_features.c();
  const int C = grid.num_cells();
  check(d_coords.same_shape(recon.coords) &&
            d_features.same_shape(recon.features),
        "reconstruct_backward: gradient shape mismatch");

  Array4D<T> dw(N, 9, H, W, T(0));
  std::vector<double> dm(static_cast<size_t>(C) * 2);
  std::vector<double> dg(static_cast<size_t>(C) * K);
  for (int n = 0; n < N; ++n) {
    std::fill(dm.begin(), dm.end(), 0.0);
    std::fill(dg.begin(), dg.end(), 0.0);

    // pass 2 backward: through the per-pixel weighted averages
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const double craw = recon.coord_den(n, 0, y, x);
        const double fraw = recon.feat_den(n, 0, y, x);
        const double cd = std::max(craw, kNormEps);
        const double fd = std::max(fraw, kNormEps);
        const bool cclamped = craw < kNormEps;
        const bool fclamped = fraw < kNormEps;
        const double dvc0 = d_coords(n, 0, y, x);
        const double dvc1 = d_coords(n, 1, y, x);
        // dot(d_out, out) terms reused across the 9 channels
        double cdot = dvc0 * recon.coords(n, 0, y, x) +
                      dvc1 * recon.coords(n, 1, y, x);
        double fdot = 0;
        for (int k = 0; k < K; ++k)
          fdot += static_cast<double>(d_features(n, k, y, x)) *
                  recon.features(n, k, y, x);

        for (int j = 0; j < 9; ++j) {
          const int c = grid.neighbor_cell(y, x, j);
          const size_t base = static_cast<size_t>(n) * C + c;
          const double wv = w(n, j, y, x);
          double acc = 0;
          if (recon.coord_mass[base] > 0) {
            const double m0 = recon.coord_center[base * 2 + 0];
            const double m1 = recon.coord_center[base * 2 + 1];
            acc += (dvc0 * m0 + dvc1 * m1 - (cclamped ? 0.0 : cdot)) / cd;
            dm[c * 2 + 0] += wv * dvc0 / cd;
            dm[c * 2 + 1] += wv * dvc1 / cd;
          }
          if (recon.feat_mass[base] > 0) {
            double dgf = 0;
            for (int k = 0; k < K; ++k)
              dgf += static_cast<double>(d_features(n, k, y, x)) *
                     recon.feat_center[base * K + k];
            acc += (dgf - (fclamped ? 0.0 : fdot)) / fd;
            const double scale = wv / fd;
            for (int k = 0; k < K; ++k)
              dg[static_cast<size_t>(c) * K + k] +=
                  scale * d_features(n, k, y, x);
          }
          dw(n, j, y, x) += static_cast<T>(acc);
        }
      }

    // pass 1 backward: through the cell centers
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        const bool ok = !valid || (*valid)(n, 0, y, x);
        for (int j = 0; j < 9; ++j) {
          const int c = grid.neighbor_cell(y, x, j);
          const size_t base = static_cast<size_t>(n) * C + c;
          double acc = 0;
          if (recon.coord_mass[base] > 0) {
            const double inv = 1.0 / recon.coord_mass[base];
            acc += dm[c * 2 + 0] * inv *
                   (pixel_coords(n, 0, y, x) - recon.coord_center[base * 2 + 0]);
            acc += dm[c * 2 + 1] * inv *
                   (pixel_coords(n, 1, y, x) - recon.coord_center[base * 2 + 1]);
          }
          if (ok && recon.feat_mass[base] > 0) {
            const double inv = 1.0 / recon.feat_mass[base];
            for (int k = 0; k < K; ++k)
              acc += dg[static_cast<size_t>(c) * K + k] * inv *
                     (pixel_features(n, k, y, x) -
                      recon.feat_center[base * K + k]);
          }
          dw(n, j, y, x) += static_cast<T>(acc);
        }
      }
  }
  return dw;
}

template <typename T>
SuperpixelLossResult<T> superpixel_loss(const Array4D<T>& features,
                                        const Array4D<T>& recon_features,
                                        const Array4D<T>& coords,
                                        const Array4D<T>& recon_coords,
                                        T m, int s,
                                        const Array4D<uint8_t>& valid,
                                        bool with_grad) {
  check(m >= T(0), "superpixel_loss: balance coefficient must be >= 0");
  check(s >= 1, "superpixel_loss: sampling interval must be >= 1");
  check(features.same_shape(recon_features),
        "superpixel_loss: feature shapes differ");
  check(coords.same_shape(recon_coords) && coords.c() == 2,
        "superpixel_loss: coordinate shapes must be (N,2,H,W)");
  const int N = features.n(), K = features.c(), H = features.h(),
            W = features.w();
  check(valid.n() == N && valid.c() == 1 && valid.h() == H && valid.w() == W,
        "superpixel_loss: validity mask must be (N,1,H,W)");

  SuperpixelLossResult<T> out;
  if (with_grad) {
    out.d_recon_features = Array4D<T>(N, K, H, W, T(0));
    out.d_recon_coords = Array4D<T>(N, 2, H, W, T(0));
  }

  const double ratio = static_cast<double>(m) / s;
  double ce_sum = 0, dist_sum = 0;
  int64_t nv = 0;
  for (int n = 0; n < N; ++n)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        if (!valid(n, 0, y, x)) continue;
        ++nv;
        for (int k = 0; k < K; ++k) {
          const double fk = features(n, k, y, x);
          if (fk != 0.0)
            ce_sum -= fk * std::log(static_cast<double>(
                               recon_features(n, k, y, x)) + kNormEps);
        }
        const double d0 = coords(n, 0, y, x) - recon_coords(n, 0, y, x);
        const double d1 = coords(n, 1, y, x) - recon_coords(n, 1, y, x);
        dist_sum += std::sqrt(d0 * d0 + d1 * d1);
      }
  out.valid_pixels = nv;
  if (nv == 0) return out;

  const double inv_nv = 1.0 / static_cast<double>(nv);
  out.ce_term = static_cast<T>(ce_sum * inv_nv);
  out.compactness_term = static_cast<T>(ratio * dist_sum * inv_nv);
  out.value = static_cast<T>(ce_sum * inv_nv + ratio * dist_sum * inv_nv);

  if (with_grad) {
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          if (!valid(n, 0, y, x)) continue;
          for (int k = 0; k < K; ++k) {
            const double fk = features(n, k, y, x);
            if (fk != 0.0)
              out.d_recon_features(n, k, y, x) = static_cast<T>(
                  -inv_nv * fk /
                  (static_cast<double>(recon_features(n, k, y, x)) + kNormEps));
          }
          const double d0 = coords(n, 0, y, x) - recon_coords(n, 0, y, x);
          const double d1 = coords(n, 1, y, x) - recon_coords(n, 1, y, x);
          const double dist = std::sqrt(d0 * d0 + d1 * d1);
          if (dist > 0) {
            const double scale = ratio * inv_nv / dist;
            out.d_recon_coords(n, 0, y, x) = static_cast<T>(-scale * d0);
            out.d_recon_coords(n, 1, y, x) = static_cast<T>(-scale * d1);
          }
        }
  }
  return out;
}

template <typename T>
SuperpixelBranchResult<T> superpixel_branch_loss(const Array4D<T>& logits,
                                                 const LabelMap& labels, T m,
                                                 int s, AssocNormMode mode,
                                                 bool with_grad) {
  check(m >= T(0), "superpixel branch: balance coefficient must be >= 0");
  check(s >= 1, "superpixel branch: sampling interval must be >= 1");
  check(labels.n() == logits.n() && labels.h() == logits.h() &&
            labels.w() == logits.w(),
        "superpixel branch: labels must match the association grid, got labels (" +
            std::to_string(labels.h()) + "x" + std::to_string(labels.w()) +
            ") vs logits (" + std::to_string(logits.h()) + "x" +
            std::to_string(logits.w()) + ")");
  labels.validate();

  auto oh = one_hot<T>(labels);
  auto xy = make_coordinate_field<T>(logits.n(), logits.h(), logits.w());
  SuperpixelGrid grid(logits.h(), logits.w(), s);

  SuperpixelBranchResult<T> out;
  out.assoc = normalize_associations(logits, mode);
  out.recon = reconstruct(out.assoc, grid, oh.data, xy, &oh.valid);
  auto loss = superpixel_loss(oh.data, out.recon.features, xy, out.recon.coords,
                              m, s, oh.valid, with_grad);
  out.value = loss.value;
  out.ce_term = loss.ce_term;
  out.compactness_term = loss.compactness_term;
  out.valid_pixels = loss.valid_pixels;
  if (with_grad) {
    if (loss.valid_pixels == 0) {
      out.d_logits = Array4D<T>(logits.n(), 9, logits.h(), logits.w(), T(0));
    } else {
      auto dwts =
          reconstruct_backward(out.assoc, grid, oh.data, xy, &oh.valid,
                               out.recon, loss.d_recon_coords,
                               loss.d_recon_features);
      out.d_logits =
          normalize_associations_backward(logits, out.assoc, dwts, mode);
    }
  }
  return out;
}

#define SEGDOCTOR_INSTANTIATE_SUPERPIXEL(T)                                    \
  template AssociationMap<T> normalize_associations(const Array4D<T>&,         \
                                                    AssocNormMode);            \
  template Array4D<T> normalize_associations_backward(                         \
      const Array4D<T>&, const AssociationMap<T>&, const Array4D<T>&,          \
      AssocNormMode);                                                          \
  template Reconstruction<T> reconstruct(                                      \
      const AssociationMap<T>&, const SuperpixelGrid&, const Array4D<T>&,      \
      const Array4D<T>&, const Array4D<uint8_t>*);                             \
  template Array4D<T> reconstruct_backward(                                    \
      const AssociationMap<T>&, const SuperpixelGrid&, const Array4D<T>&,      \
      const Array4D<T>&, const Array4D<uint8_t>*, const Reconstruction<T>&,    \
      const Array4D<T>&, const Array4D<T>&);                                   \
  template SuperpixelLossResult<T> superpixel_loss(                            \
      const Array4D<T>&, const Array4D<T>&, const Array4D<T>&,                 \
      const Array4D<T>&, T, int, const Array4D<uint8_t>&, bool);               \
  template SuperpixelBranchResult<T> superpixel_branch_loss(                   \
      const Array4D<T>&, const LabelMap&, T, int, AssocNormMode, bool);

SEGDOCTOR_INSTANTIATE_SUPERPIXEL(float)
SEGDOCTOR_INSTANTIATE_SUPERPIXEL(double)

}  // namespace segdoctor
