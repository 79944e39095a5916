#pragma once

#include <vector>

#include "vsr/tensor.hpp"

// Plain-tensor numeric kernels. The autodiff layer wraps these; metrics and
// the classical flow estimator call them directly. All kernels are
// single-threaded and deterministic.
namespace vsr::kern {

// 2-D convolution, zero padding. Weights are packed (kh, kw, ci*co) with the
// output channel fastest: wt.at(ky, kx, ci_idx * co + co_idx). bias may be
// null; if present it is a (1, 1, co) tensor.
Tensor conv2d(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co,
              int stride, int pad);

// Gradients of conv2d. Any of gx/gw/gb may be null to skip that gradient.
// Non-null outputs must be pre-shaped; gradients are accumulated into them.
void conv2d_backward(const Tensor& x, const Tensor& wt, int ci, int co, int stride, int pad,
                     const Tensor& gout, Tensor* gx, Tensor* gw, Tensor* gb);

// Transposed convolution producing exactly (h*stride, w*stride) output, for
// kernel size k = 2*stride with pad = stride/2... here fixed to the k=4,
// stride=2, pad=1 configuration used by the up-projection stages.
Tensor deconv2d(const Tensor& x, const Tensor& wt, const Tensor* bias, int ci, int co);
void deconv2d_backward(const Tensor& x, const Tensor& wt, int ci, int co, const Tensor& gout,
                       Tensor* gx, Tensor* gw, Tensor* gb);

// Bilinear warp: out(y, x, c) = in(y + dy, x + dx, c) sampled bilinearly with
// coordinates clamped to the valid range. flow has 2 channels (dx, dy).
Tensor warp(const Tensor& frame, const Tensor& flow);
void warp_backward(const Tensor& frame, const Tensor& flow, const Tensor& gout,
                   Tensor* gframe, Tensor* gflow);

// Bilinear resize to (oh, ow), centers aligned. Linear in the input.
Tensor resize_bilinear(const Tensor& x, int oh, int ow);
void resize_bilinear_backward(const Tensor& x, int oh, int ow, const Tensor& gout, Tensor* gx);

// Bicubic (Keys a = -0.5) upsample by an integer factor, centers aligned,
// border-clamped. Linear in the input.
Tensor bicubic_upsample(const Tensor& x, int scale);
void bicubic_upsample_backward(const Tensor& x, int scale, const Tensor& gout, Tensor* gx);

// Antialiased bicubic downsample by an integer factor (kernel stretched by
// the factor, per-pixel weight normalization, border-clamped). Input dims
// must be divisible by scale.
Tensor bicubic_downsample(const Tensor& x, int scale);

// Normalized 1-D Gaussian taps, ksize odd.
std::vector<double> gaussian_taps(double sigma, int ksize);

// Separable symmetric-padding convolution with the same 1-D taps in x and y.
// Symmetric (edge-including) reflection keeps the global sum of any frame
// unchanged for a normalized kernel.
Tensor sepconv_symmetric(const Tensor& x, const std::vector<double>& taps);

// Separable valid-mode convolution (output shrinks by ksize-1 per axis).
Tensor sepconv_valid(const Tensor& x, const std::vector<double>& taps);

// ITU-R BT.601 luma from an RGB tensor, output single channel.
Tensor luma601(const Tensor& rgb);

// Spatial crop (no bounds forgiveness: caller guarantees validity).
Tensor crop(const Tensor& x, int y0, int x0, int ch, int cw);

}  // namespace vsr::kern
