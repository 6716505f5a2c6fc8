#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ditto/common.hpp"
#include "ditto/rng.hpp"

namespace ditto::nn {

using Mat = Eigen::MatrixXf;
using Vec = Eigen::VectorXf;

// Learnable tensor with its gradient and Adam moments. Convolution weights are
// stored flattened as (out_channels) x (in_channels * k * k).
struct Param {
    Mat w, g, m, v;

    void init(Eigen::Index rows, Eigen::Index cols) {
        w = Mat::Zero(rows, cols);
        g = Mat::Zero(rows, cols);
        m = Mat::Zero(rows, cols);
        v = Mat::Zero(rows, cols);
    }

    void fill_normal(Rng& rng, float std_dev) {
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i)
                w(i, j) = rng.normalf() * std_dev;
    }
};

struct NamedParam {
    std::string name;
    Param* param;
};

struct Adam {
    float lr = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    float clip = 0.0f;  // global L2 norm; 0 disables
    int64_t t = 0;

    void zero_grad(const std::vector<Param*>& params) {
        for (Param* p : params)
            p->g.setZero();
    }

    void step(const std::vector<Param*>& params) {
        ++t;
        if (clip > 0.0f) {
            double sq = 0.0;
            for (Param* p : params)
                sq += static_cast<double>(p->g.squaredNorm());
            double norm = std::sqrt(sq);
            if (norm > clip) {
                float scale = static_cast<float>(clip / norm);
                for (Param* p : params)
                    p->g *= scale;
            }
        }
        float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t));
        float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t));
        for (Param* p : params) {
            p->m = beta1 * p->m + (1.0f - beta1) * p->g;
            p->v = beta2 * p->v + (1.0f - beta2) * p->g.cwiseProduct(p->g);
            p->w.array() -=
                lr * (p->m.array() / bc1) / ((p->v.array() / bc2).sqrt() + eps);
        }
    }
};

// Exponential moving average of parameters; sampling uses the averaged weights.
struct Ema {
    float decay = 0.999f;
    std::vector<Mat> shadow;

    void init(const std::vector<Param*>& params) {
        shadow.clear();
        for (Param* p : params)
            shadow.push_back(p->w);
    }
    void update(const std::vector<Param*>& params) {
        for (std::size_t i = 0; i < shadow.size(); ++i)
            shadow[i] = decay * shadow[i] + (1.0f - decay) * params[i]->w;
    }
    void copy_to(const std::vector<Param*>& params) const {
        for (std::size_t i = 0; i < shadow.size(); ++i)
            params[i]->w = shadow[i];
    }
};

/* ------------------------------ activations ----------------------------- */

inline Mat silu(const Mat& x) {
    return x.array() / (1.0f + (-x.array()).exp());
}

inline Mat silu_backward(const Mat& dy, const Mat& x) {
    Eigen::ArrayXXf s = 1.0f / (1.0f + (-x.array()).exp());
    return (dy.array() * s * (1.0f + x.array() * (1.0f - s))).matrix();
}

/* -------------------------------- layers -------------------------------- */

// Fully connected: y = W x + b. Activations are (features) x (batch).
struct Dense {
    Param weight, bias;

    struct Cache {
        Mat x;
    };

    void init(int in, int out, Rng& rng, bool zero = false) {
        weight.init(out, in);
        bias.init(out, 1);
        if (!zero)
            weight.fill_normal(rng, std::sqrt(2.0f / static_cast<float>(in)));
    }

    Mat forward(const Mat& x, Cache* cc) const {
        if (x.rows() != weight.w.cols())
            throw domain_error("dense: input dimensionality mismatch");
        if (cc)
            cc->x = x;
        Mat y = weight.w * x;
        y.colwise() += bias.w.col(0);
        return y;
    }

    Mat backward(const Mat& dy, const Cache& cc) {
        weight.g.noalias() += dy * cc.x.transpose();
        bias.g.col(0) += dy.rowwise().sum();
        return weight.w.transpose() * dy;
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".bias", &bias});
    }
};

// Feature maps are (channels) x (batch * H * W); sample b owns the contiguous
// column block [b*H*W, (b+1)*H*W).
struct Conv2d {
    int ic = 0, oc = 0, k = 3, stride = 1, pad = 1;
    int H = 0, W = 0, OH = 0, OW = 0;
    Param weight, bias;

    struct Cache {
        Mat patches;
        int batch = 0;
    };

    void init(int in_ch, int out_ch, int kernel, int stride_, int in_h, int in_w, Rng& rng,
              bool zero = false) {
        ic = in_ch;
        oc = out_ch;
        k = kernel;
        stride = stride_;
        pad = (kernel - 1) / 2;
        H = in_h;
        W = in_w;
        OH = (H + 2 * pad - k) / stride + 1;
        OW = (W + 2 * pad - k) / stride + 1;
        weight.init(oc, static_cast<Eigen::Index>(ic) * k * k);
        bias.init(oc, 1);
        if (!zero)
            weight.fill_normal(rng, std::sqrt(2.0f / static_cast<float>(ic * k * k)));
    }

    Mat im2col(const Mat& x, int batch) const {
        Mat patches(static_cast<Eigen::Index>(ic) * k * k,
                    static_cast<Eigen::Index>(batch) * OH * OW);
        for (int b = 0; b < batch; ++b) {
            Eigen::Index in_off = static_cast<Eigen::Index>(b) * H * W;
            Eigen::Index out_off = static_cast<Eigen::Index>(b) * OH * OW;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    Eigen::Index col = out_off + static_cast<Eigen::Index>(oh) * OW + ow;
                    float* dst = patches.data() + col * patches.rows();
                    for (int c = 0; c < ic; ++c)
                        for (int ki = 0; ki < k; ++ki) {
                            int ih = oh * stride - pad + ki;
                            for (int kj = 0; kj < k; ++kj) {
                                int iw = ow * stride - pad + kj;
                                *dst++ = (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                             ? x(c, in_off + static_cast<Eigen::Index>(ih) * W + iw)
                                             : 0.0f;
                            }
                        }
                }
        }
        return patches;
    }

    void col2im(const Mat& dpatches, int batch, Mat& dx) const {
        for (int b = 0; b < batch; ++b) {
            Eigen::Index in_off = static_cast<Eigen::Index>(b) * H * W;
            Eigen::Index out_off = static_cast<Eigen::Index>(b) * OH * OW;
            for (int oh = 0; oh < OH; ++oh)
                for (int ow = 0; ow < OW; ++ow) {
                    Eigen::Index col = out_off + static_cast<Eigen::Index>(oh) * OW + ow;
                    const float* src = dpatches.data() + col * dpatches.rows();
                    for (int c = 0; c < ic; ++c)
                        for (int ki = 0; ki < k; ++ki) {
                            int ih = oh * stride - pad + ki;
                            for (int kj = 0; kj < k; ++kj) {
                                int iw = ow * stride - pad + kj;
                                float v = *src++;
                                if (ih >= 0 && ih < H && iw >= 0 && iw < W)
                                    dx(c, in_off + static_cast<Eigen::Index>(ih) * W + iw) += v;
                            }
                        }
                }
        }
    }

    Mat forward(const Mat& x, Cache* cc) const {
        if (x.rows() != ic || x.cols() % (static_cast<Eigen::Index>(H) * W) != 0)
            throw domain_error("conv: input shape mismatch");
        int batch = static_cast<int>(x.cols() / (static_cast<Eigen::Index>(H) * W));
        Mat patches = im2col(x, batch);
        Mat y = weight.w * patches;
        y.colwise() += bias.w.col(0);
        if (cc) {
            cc->patches = std::move(patches);
            cc->batch = batch;
        }
        return y;
    }

    Mat backward(const Mat& dy, const Cache& cc) {
        weight.g.noalias() += dy * cc.patches.transpose();
        bias.g.col(0) += dy.rowwise().sum();
        Mat dpatches = weight.w.transpose() * dy;
        Mat dx = Mat::Zero(ic, static_cast<Eigen::Index>(cc.batch) * H * W);
        col2im(dpatches, cc.batch, dx);
        return dx;
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight});
        out.push_back({prefix + ".bias", &bias});
    }
};

// Per-sample, per-group normalization over (channels_in_group x H*W).
struct GroupNorm {
    int channels = 0, groups = 1, hw = 0;
    float eps = 1e-5f;
    Param gamma, beta;

    struct Cache {
        Mat xhat;
        std::vector<float> inv_std;
        int batch = 0;
    };

    void init(int ch, int groups_, int spatial) {
        channels = ch;
        groups = groups_;
        hw = spatial;
        if (ch % groups_ != 0)
            throw domain_error("groupnorm: channels must divide into groups");
        gamma.init(ch, 1);
        beta.init(ch, 1);
        gamma.w.setOnes();
    }

    Mat forward(const Mat& x, Cache* cc) const {
        if (x.rows() != channels || x.cols() % hw != 0)
            throw domain_error("groupnorm: input shape mismatch");
        int batch = static_cast<int>(x.cols() / hw);
        int cg = channels / groups;
        Mat xhat(x.rows(), x.cols());
        std::vector<float> inv_std(static_cast<std::size_t>(batch) * groups);
        for (int b = 0; b < batch; ++b)
            for (int g = 0; g < groups; ++g) {
                auto block = x.block(static_cast<Eigen::Index>(g) * cg,
                                     static_cast<Eigen::Index>(b) * hw, cg, hw);
                float mean = block.mean();
                float var = (block.array() - mean).square().mean();
                float istd = 1.0f / std::sqrt(var + eps);
                inv_std[static_cast<std::size_t>(b) * groups + g] = istd;
                xhat.block(static_cast<Eigen::Index>(g) * cg, static_cast<Eigen::Index>(b) * hw,
                           cg, hw) = ((block.array() - mean) * istd).matrix();
            }
        Mat y = xhat;
        y.array().colwise() *= gamma.w.col(0).array();
        y.colwise() += beta.w.col(0);
        if (cc) {
            cc->xhat = std::move(xhat);
            cc->inv_std = std::move(inv_std);
            cc->batch = batch;
        }
        return y;
    }

    Mat backward(const Mat& dy, const Cache& cc) {
        int cg = channels / groups;
        gamma.g.col(0) += dy.cwiseProduct(cc.xhat).rowwise().sum();
        beta.g.col(0) += dy.rowwise().sum();
        Mat dx(dy.rows(), dy.cols());
        for (int b = 0; b < cc.batch; ++b)
            for (int g = 0; g < groups; ++g) {
                auto dyb = dy.block(static_cast<Eigen::Index>(g) * cg,
                                    static_cast<Eigen::Index>(b) * hw, cg, hw);
                auto xh = cc.xhat.block(static_cast<Eigen::Index>(g) * cg,
                                        static_cast<Eigen::Index>(b) * hw, cg, hw);
                Eigen::ArrayXXf dxhat =
                    dyb.array().colwise() * gamma.w.col(0).segment(g * cg, cg).array();
                float m = static_cast<float>(cg * hw);
                float sum_dxhat = dxhat.sum();
                float sum_dxhat_xhat = (dxhat * xh.array()).sum();
                float istd = cc.inv_std[static_cast<std::size_t>(b) * groups + g];
                dx.block(static_cast<Eigen::Index>(g) * cg, static_cast<Eigen::Index>(b) * hw,
                         cg, hw) =
                    ((dxhat - sum_dxhat / m - xh.array() * (sum_dxhat_xhat / m)) * istd).matrix();
            }
        return dx;
    }

    void collect(std::vector<NamedParam>& out, const std::string& prefix) {
        out.push_back({prefix + ".gamma", &gamma});
        out.push_back({prefix + ".beta", &beta});
    }
};

/* ---------------------------- spatial helpers --------------------------- */

inline Mat upsample_nearest2x(const Mat& x, int H, int W) {
    int batch = static_cast<int>(x.cols() / (static_cast<Eigen::Index>(H) * W));
    Mat y(x.rows(), x.cols() * 4);
    int OW = W * 2;
    for (int b = 0; b < batch; ++b)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                Eigen::Index src = static_cast<Eigen::Index>(b) * H * W + static_cast<Eigen::Index>(h) * W + w;
                Eigen::Index base = static_cast<Eigen::Index>(b) * H * W * 4;
                y.col(base + static_cast<Eigen::Index>(2 * h) * OW + 2 * w) = x.col(src);
                y.col(base + static_cast<Eigen::Index>(2 * h) * OW + 2 * w + 1) = x.col(src);
                y.col(base + static_cast<Eigen::Index>(2 * h + 1) * OW + 2 * w) = x.col(src);
                y.col(base + static_cast<Eigen::Index>(2 * h + 1) * OW + 2 * w + 1) = x.col(src);
            }
    return y;
}

inline Mat upsample_nearest2x_backward(const Mat& dy, int H, int W) {
    int batch = static_cast<int>(dy.cols() / (static_cast<Eigen::Index>(H) * W * 4));
    Mat dx = Mat::Zero(dy.rows(), dy.cols() / 4);
    int OW = W * 2;
    for (int b = 0; b < batch; ++b)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                Eigen::Index dst = static_cast<Eigen::Index>(b) * H * W + static_cast<Eigen::Index>(h) * W + w;
                Eigen::Index base = static_cast<Eigen::Index>(b) * H * W * 4;
                dx.col(dst) = dy.col(base + static_cast<Eigen::Index>(2 * h) * OW + 2 * w) +
                              dy.col(base + static_cast<Eigen::Index>(2 * h) * OW + 2 * w + 1) +
                              dy.col(base + static_cast<Eigen::Index>(2 * h + 1) * OW + 2 * w) +
                              dy.col(base + static_cast<Eigen::Index>(2 * h + 1) * OW + 2 * w + 1);
            }
    return dx;
}

// Adds a per-sample channel bias to a feature map whose sample blocks span
// `hw` columns; bias (C x batch) comes from a projection of the embedding.
inline void add_channel_bias(Mat& x, const Mat& bias, int hw) {
    int batch = static_cast<int>(x.cols() / hw);
    for (int b = 0; b < batch; ++b)
        x.middleCols(static_cast<Eigen::Index>(b) * hw, hw).colwise() += bias.col(b);
}

inline Mat channel_bias_backward(const Mat& dy, int hw) {
    int batch = static_cast<int>(dy.cols() / hw);
    Mat db(dy.rows(), batch);
    for (int b = 0; b < batch; ++b)
        db.col(b) = dy.middleCols(static_cast<Eigen::Index>(b) * hw, hw).rowwise().sum();
    return db;
}

// Classic sinusoidal position features for diffusion timesteps.
inline Vec timestep_embedding(double t, int dim) {
    int half = dim / 2;
    Vec emb(dim);
    for (int i = 0; i < half; ++i) {
        double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
        emb(i) = static_cast<float>(std::sin(t * freq));
        emb(half + i) = static_cast<float>(std::cos(t * freq));
    }
    if (dim % 2 == 1)
        emb(dim - 1) = 0.0f;
    return emb;
}

inline void fill_normal(Mat& m, Rng& rng) {
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            m(i, j) = rng.normalf();
}

}  // namespace ditto::nn
