#pragma once

#include "samples.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace eshop::tcn {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;
template <typename T>
using RowVecMap = Eigen::Map<RowVec<T>>;
template <typename T>
using ConstRowVecMap = Eigen::Map<const RowVec<T>>;
// Eigen picks its vectorized peel from the runtime address, so buffers mapped by
// the kernels need a fixed alignment for results to repeat bit for bit.
template <typename T>
using AlignedVec = std::vector<T, Eigen::aligned_allocator<T>>;

struct TcnConfig
{
    int inputChannels = 39;
    int kernelSize = 11;
    std::vector<int> dilations{1, 2, 4, 8, 16, 32, 64};
    int hiddenChannels = 32;
    std::vector<int> denseSizes{32, 16, 8};
    int outputDim = 1;
    std::uint64_t seed = 1;

    void validate() const;
    /** 1 + (k - 1) * sum(d): number of past steps that can reach the last output. */
    long receptiveField() const;
};

/**
 * Offsets of every tensor inside the flat parameter vector, in file order:
 * per block conv W [k x Cin x Cout], conv b, then (on channel change) 1x1 W and b;
 * then per dense layer W [in x out], b.
 */
struct ParamLayout
{
    struct Block
    {
        int cin = 0;
        int cout = 0;
        int dilation = 1;
        std::size_t convW = 0;
        std::size_t convB = 0;
        bool projected = false;
        std::size_t projW = 0;
        std::size_t projB = 0;
    };
    struct Dense
    {
        int in = 0;
        int out = 0;
        std::size_t w = 0;
        std::size_t b = 0;
    };

    int kernelSize = 1;
    std::vector<Block> blocks;
    std::vector<Dense> dense;
    std::size_t total = 0;

    static ParamLayout build(const TcnConfig& cfg);
};

// --- sequence-level building blocks (x is T x C, row t = time step t) ---

/** y[t] = b + sum_p x[t - d p] W_p with zero history; W is (k * Cin) x Cout. */
template <typename T>
Mat<T> dilatedCausalConv(const Mat<T>& x, const Mat<T>& w, const RowVec<T>& bias, int dilation);

template <typename T>
Mat<T> causalConv(const Mat<T>& x, const Mat<T>& w, const RowVec<T>& bias)
{
    return dilatedCausalConv<T>(x, w, bias, 1);
}

template <typename T>
struct BlockWeights
{
    Mat<T> convW;
    RowVec<T> convB;
    bool projected = false;
    Mat<T> projW;
    RowVec<T> projB;
};

/** relu(proj(x) + relu(conv_d(x))), proj = identity unless channels change. */
template <typename T>
Mat<T> residualBlock(const Mat<T>& x, const BlockWeights<T>& p, int dilation);

template <typename T>
class TcnModel
{
  public:
    explicit TcnModel(const TcnConfig& cfg);

    const TcnConfig& config() const { return cfg_; }
    const ParamLayout& layout() const { return layout_; }
    std::size_t paramCount() const { return layout_.total; }

    AlignedVec<T>& params() { return params_; }
    const AlignedVec<T>& params() const { return params_; }

    /** He-uniform fan-in initialization, zero biases. */
    void initialize(std::uint64_t seed);

    BlockWeights<T> blockWeights(std::size_t l) const;

    /** Predicted value for one window (W x Cin, row-major, oldest first). */
    T predict(std::span<const T> window, int windowLen) const;

    /** Same prediction through full-length sequence ops; slower, used as a reference. */
    T predictReference(const Mat<T>& window) const;

    /**
     * Batched forward and optional backward of the RMSE loss.
     * windows: B x (W * Cin). Returns the loss; fills preds (B) and, when grad
     * is non-null, grad (paramCount, overwritten).
     */
    T lossAndGradient(const Mat<T>& windows, int windowLen, std::span<const T> labels,
                      std::span<T> preds, AlignedVec<T>* grad) const;

    void forwardBatch(const Mat<T>& windows, int windowLen, std::span<T> preds) const;

  private:
    struct Plan;
    const Plan& plan(int windowLen) const;

    TcnConfig cfg_;
    ParamLayout layout_;
    AlignedVec<T> params_;
    mutable std::vector<std::pair<int, std::shared_ptr<const Plan>>> plans_;
};

/** RMSE and its gradient w.r.t. predictions; gradient is 0 when the loss is 0. */
template <typename T>
T rmseLoss(std::span<const T> y, std::span<const T> yhat, std::span<T> grad);

struct TrainConfig
{
    double learningRate = 1e-3;
    int batchSize = 64;
    int epochs = 300;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int patience = 20;
    double lrDecay = 1.0; // learning rate multiplier applied after each epoch
    std::uint64_t seed = 1;

    void validate() const;
};

struct EpochStats
{
    int epoch = 0;
    double trainRmse = 0.0;
    double valRmse = 0.0; // NaN without a validation set
};

struct TrainResult
{
    std::vector<EpochStats> history;
    int bestEpoch = 0;
    double bestValRmse = 0.0;
    bool earlyStopped = false;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/**
 * Mini-batch adaptive-moment training on the RMSE loss. With a validation set the
 * model ends holding the best-validation parameters. Single-threaded, deterministic.
 */
template <typename T>
TrainResult train(TcnModel<T>& model, const SampleProvider& trainSet, const SampleProvider* valSet,
                  const TrainConfig& cfg, const EpochCallback& onEpoch = {});

/** Predictions for every sample, in provider order. */
template <typename T>
std::vector<double> predictAll(const TcnModel<T>& model, const SampleProvider& samples,
                               int batchSize = 256);

} // namespace eshop::tcn
