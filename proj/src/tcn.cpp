#include "tcn.hpp"

#include "common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace eshop::tcn {

void
TcnConfig::validate() const
{
    if (inputChannels < 1 || hiddenChannels < 1 || kernelSize < 1 || outputDim != 1) {
        throwConfig("tcn: invalid channel/kernel configuration");
    }
    if (dilations.empty()) {
        throwConfig("tcn: at least one dilation is required");
    }
    for (std::size_t i = 0; i < dilations.size(); ++i) {
        const int d = dilations[i];
        if (d < 1 || (d & (d - 1)) != 0) {
            throwConfig("tcn: dilations must be powers of two");
        }
        if (i > 0 && d <= dilations[i - 1]) {
            throwConfig("tcn: dilations must be strictly increasing");
        }
    }
    for (int s : denseSizes) {
        if (s < 1) {
            throwConfig("tcn: dense sizes must be positive");
        }
    }
}

long
TcnConfig::receptiveField() const
{
    long sum = 0;
    for (int d : dilations) {
        sum += d;
    }
    return 1 + static_cast<long>(kernelSize - 1) * sum;
}

ParamLayout
ParamLayout::build(const TcnConfig& cfg)
{
    cfg.validate();
    ParamLayout l;
    l.kernelSize = cfg.kernelSize;
    std::size_t off = 0;
    int cin = cfg.inputChannels;
    for (int d : cfg.dilations) {
        Block b;
        b.cin = cin;
        b.cout = cfg.hiddenChannels;
        b.dilation = d;
        b.convW = off;
        off += static_cast<std::size_t>(cfg.kernelSize) * cin * b.cout;
        b.convB = off;
        off += b.cout;
        b.projected = cin != b.cout;
        if (b.projected) {
            b.projW = off;
            off += static_cast<std::size_t>(cin) * b.cout;
            b.projB = off;
            off += b.cout;
        }
        l.blocks.push_back(b);
        cin = b.cout;
    }
    std::vector<int> sizes = cfg.denseSizes;
    sizes.push_back(cfg.outputDim);
    for (int s : sizes) {
        Dense dl;
        dl.in = cin;
        dl.out = s;
        dl.w = off;
        off += static_cast<std::size_t>(cin) * s;
        dl.b = off;
        off += s;
        l.dense.push_back(dl);
        cin = s;
    }
    l.total = off;
    return l;
}

// --- sequence ops ---

template <typename T>
Mat<T>
dilatedCausalConv(const Mat<T>& x, const Mat<T>& w, const RowVec<T>& bias, int dilation)
{
    const Eigen::Index steps = x.rows();
    const Eigen::Index cin = x.cols();
    if (dilation < 1) {
        throwConfig("dilated_causal_conv: dilation must be >= 1");
    }
    if (cin == 0 || w.rows() % cin != 0 || bias.size() != w.cols()) {
        throwData("dilated_causal_conv: shape mismatch");
    }
    const Eigen::Index k = w.rows() / cin;
    // taps reaching only the zero history are dropped
    const Eigen::Index kv = steps == 0 ? 0 : std::min<Eigen::Index>(k, (steps - 1) / dilation + 1);
    Mat<T> z = Mat<T>::Zero(steps, kv * cin);
    for (Eigen::Index p = 0; p < kv; ++p) {
        const Eigen::Index shift = p * dilation;
        z.block(shift, p * cin, steps - shift, cin) = x.topRows(steps - shift);
    }
    Mat<T> y(steps, w.cols());
    y.noalias() = z * w.topRows(kv * cin);
    y.rowwise() += bias;
    return y;
}

template <typename T>
Mat<T>
residualBlock(const Mat<T>& x, const BlockWeights<T>& p, int dilation)
{
    const Mat<T> h = dilatedCausalConv<T>(x, p.convW, p.convB, dilation).cwiseMax(T(0));
    Mat<T> skip;
    if (p.projected) {
        skip.noalias() = x * p.projW;
        skip.rowwise() += p.projB;
    } else {
        if (x.cols() != h.cols()) {
            throwData("residual_block: channel mismatch without projection");
        }
        skip = x;
    }
    return (skip + h).cwiseMax(T(0));
}

// --- model ---

template <typename T>
struct TcnModel<T>::Plan
{
    struct BlockPlan
    {
        int kv = 0;
        std::vector<int> src;  // nOut * kv, row in the input set or -1
        std::vector<int> self; // nOut, row of t itself in the input set
    };
    int windowLen = 0;
    std::vector<std::vector<int>> times; // times[0] = inputs of block 0, times[l+1] = outputs of block l
    std::vector<BlockPlan> blocks;
};

template <typename T>
TcnModel<T>::TcnModel(const TcnConfig& cfg)
    : cfg_(cfg), layout_(ParamLayout::build(cfg)), params_(layout_.total, T(0))
{
}

template <typename T>
void
TcnModel<T>::initialize(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    auto fill = [&](std::size_t off, std::size_t n, int fanIn) {
        const double lim = std::sqrt(6.0 / fanIn);
        std::uniform_real_distribution<double> u(-lim, lim);
        for (std::size_t i = 0; i < n; ++i) {
            params_[off + i] = static_cast<T>(u(rng));
        }
    };
    std::fill(params_.begin(), params_.end(), T(0));
    for (const auto& b : layout_.blocks) {
        fill(b.convW, static_cast<std::size_t>(layout_.kernelSize) * b.cin * b.cout,
             layout_.kernelSize * b.cin);
        if (b.projected) {
            fill(b.projW, static_cast<std::size_t>(b.cin) * b.cout, b.cin);
        }
    }
    for (const auto& d : layout_.dense) {
        fill(d.w, static_cast<std::size_t>(d.in) * d.out, d.in);
    }
}

template <typename T>
BlockWeights<T>
TcnModel<T>::blockWeights(std::size_t l) const
{
    const auto& b = layout_.blocks.at(l);
    BlockWeights<T> w;
    w.convW = ConstMatMap<T>(&params_[b.convW], layout_.kernelSize * b.cin, b.cout);
    w.convB = ConstRowVecMap<T>(&params_[b.convB], b.cout);
    w.projected = b.projected;
    if (b.projected) {
        w.projW = ConstMatMap<T>(&params_[b.projW], b.cin, b.cout);
        w.projB = ConstRowVecMap<T>(&params_[b.projB], b.cout);
    }
    return w;
}

template <typename T>
const typename TcnModel<T>::Plan&
TcnModel<T>::plan(int windowLen) const
{
    for (const auto& [len, p] : plans_) {
        if (len == windowLen) {
            return *p;
        }
    }
    if (windowLen < 1) {
        throwData("tcn: window length must be >= 1");
    }
    auto p = std::make_shared<Plan>();
    p->windowLen = windowLen;
    const std::size_t nb = layout_.blocks.size();
    p->times.resize(nb + 1);
    p->blocks.resize(nb);
    p->times[nb] = {windowLen - 1};
    const int k = layout_.kernelSize;
    for (std::size_t l = nb; l-- > 0;) {
        const int d = layout_.blocks[l].dilation;
        const auto& out = p->times[l + 1];
        std::set<int> in(out.begin(), out.end());
        for (int t : out) {
            for (int q = 0; q < k && t - d * q >= 0; ++q) {
                in.insert(t - d * q);
            }
        }
        p->times[l].assign(in.begin(), in.end());
        std::vector<int> index(static_cast<std::size_t>(windowLen), -1);
        for (std::size_t i = 0; i < p->times[l].size(); ++i) {
            index[p->times[l][i]] = static_cast<int>(i);
        }
        auto& bp = p->blocks[l];
        bp.kv = std::min(k, out.back() / d + 1);
        bp.src.assign(out.size() * bp.kv, -1);
        bp.self.resize(out.size());
        for (std::size_t j = 0; j < out.size(); ++j) {
            bp.self[j] = index[out[j]];
            for (int q = 0; q < bp.kv; ++q) {
                const int s = out[j] - d * q;
                bp.src[j * bp.kv + q] = s >= 0 ? index[s] : -1;
            }
        }
    }
    plans_.emplace_back(windowLen, p);
    return *plans_.back().second;
}

namespace {

template <typename T>
struct BlockCache
{
    Mat<T> z;    // im2col input
    Mat<T> hPre; // conv output before relu
    Mat<T> xSelf;
    Mat<T> sum; // skip + relu(hPre)
};

template <typename T>
struct Forward
{
    std::vector<Mat<T>> acts; // acts[0] gathered inputs, acts[l+1] block l output
    std::vector<BlockCache<T>> blocks;
    std::vector<Mat<T>> denseIn;
    std::vector<Mat<T>> densePre;
};

} // namespace

template <typename T>
T
TcnModel<T>::lossAndGradient(const Mat<T>& windows, int windowLen, std::span<const T> labels,
                             std::span<T> preds, AlignedVec<T>* grad) const
{
    const Plan& pl = plan(windowLen);
    const Eigen::Index batch = windows.rows();
    const int cin0 = cfg_.inputChannels;
    if (windows.cols() != static_cast<Eigen::Index>(windowLen) * cin0) {
        throwData("tcn: window shape does not match the model input");
    }
    if (static_cast<Eigen::Index>(preds.size()) != batch) {
        throwData("tcn: prediction buffer size mismatch");
    }
    const std::size_t nb = layout_.blocks.size();

    Forward<T> f;
    f.acts.resize(nb + 1);
    f.blocks.resize(nb);
    {
        const auto& t0 = pl.times[0];
        const auto n0 = static_cast<Eigen::Index>(t0.size());
        Mat<T>& a0 = f.acts[0];
        a0.resize(batch * n0, cin0);
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index i = 0; i < n0; ++i) {
                a0.row(b * n0 + i) = windows.row(b).segment(t0[i] * cin0, cin0);
            }
        }
    }
    for (std::size_t l = 0; l < nb; ++l) {
        const auto& lb = layout_.blocks[l];
        const auto& bp = pl.blocks[l];
        const auto nIn = static_cast<Eigen::Index>(pl.times[l].size());
        const auto nOut = static_cast<Eigen::Index>(pl.times[l + 1].size());
        const Mat<T>& in = f.acts[l];
        BlockCache<T>& c = f.blocks[l];

        c.z.setZero(batch * nOut, static_cast<Eigen::Index>(bp.kv) * lb.cin);
        c.xSelf.resize(batch * nOut, lb.cin);
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index j = 0; j < nOut; ++j) {
                const Eigen::Index r = b * nOut + j;
                for (int q = 0; q < bp.kv; ++q) {
                    const int s = bp.src[j * bp.kv + q];
                    if (s >= 0) {
                        c.z.row(r).segment(q * lb.cin, lb.cin) = in.row(b * nIn + s);
                    }
                }
                c.xSelf.row(r) = in.row(b * nIn + bp.self[j]);
            }
        }
        ConstMatMap<T> w(&params_[lb.convW], layout_.kernelSize * lb.cin, lb.cout);
        ConstRowVecMap<T> bias(&params_[lb.convB], lb.cout);
        c.hPre.resize(batch * nOut, lb.cout);
        c.hPre.noalias() = c.z * w.topRows(static_cast<Eigen::Index>(bp.kv) * lb.cin);
        c.hPre.rowwise() += bias;
        if (lb.projected) {
            ConstMatMap<T> pw(&params_[lb.projW], lb.cin, lb.cout);
            ConstRowVecMap<T> pb(&params_[lb.projB], lb.cout);
            c.sum.resize(batch * nOut, lb.cout);
            c.sum.noalias() = c.xSelf * pw;
            c.sum.rowwise() += pb;
            c.sum += c.hPre.cwiseMax(T(0));
        } else {
            c.sum = c.xSelf + c.hPre.cwiseMax(T(0));
        }
        f.acts[l + 1] = c.sum.cwiseMax(T(0));
    }

    // head on the last time step
    Mat<T> a = f.acts[nb];
    f.denseIn.resize(layout_.dense.size());
    f.densePre.resize(layout_.dense.size());
    for (std::size_t i = 0; i < layout_.dense.size(); ++i) {
        const auto& dl = layout_.dense[i];
        ConstMatMap<T> w(&params_[dl.w], dl.in, dl.out);
        ConstRowVecMap<T> bias(&params_[dl.b], dl.out);
        f.denseIn[i] = a;
        f.densePre[i].resize(batch, dl.out);
        f.densePre[i].noalias() = a * w;
        f.densePre[i].rowwise() += bias;
        const bool last = i + 1 == layout_.dense.size();
        a = last ? f.densePre[i] : Mat<T>(f.densePre[i].cwiseMax(T(0)));
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
        preds[b] = a(b, 0);
    }

    if (labels.empty()) {
        return T(0);
    }
    std::vector<T> dPred(static_cast<std::size_t>(batch));
    const T loss = rmseLoss<T>(labels, std::span<const T>(preds.data(), preds.size()), dPred);
    if (!grad) {
        return loss;
    }

    grad->assign(layout_.total, T(0));
    AlignedVec<T>& g = *grad;
    Mat<T> delta(batch, 1);
    for (Eigen::Index b = 0; b < batch; ++b) {
        delta(b, 0) = dPred[b];
    }
    for (std::size_t i = layout_.dense.size(); i-- > 0;) {
        const auto& dl = layout_.dense[i];
        const bool last = i + 1 == layout_.dense.size();
        if (!last) {
            delta = delta.cwiseProduct(
                (f.densePre[i].array() > T(0)).template cast<T>().matrix());
        }
        MatMap<T> gw(&g[dl.w], dl.in, dl.out);
        RowVecMap<T> gb(&g[dl.b], dl.out);
        gw.noalias() += f.denseIn[i].transpose() * delta;
        gb += delta.colwise().sum();
        ConstMatMap<T> w(&params_[dl.w], dl.in, dl.out);
        Mat<T> prev(batch, dl.in);
        prev.noalias() = delta * w.transpose();
        delta = std::move(prev);
    }

    // delta is now d loss / d block output at the last step (batch x C)
    Mat<T> dOut = std::move(delta);
    for (std::size_t l = nb; l-- > 0;) {
        const auto& lb = layout_.blocks[l];
        const auto& bp = pl.blocks[l];
        const auto nIn = static_cast<Eigen::Index>(pl.times[l].size());
        const auto nOut = static_cast<Eigen::Index>(pl.times[l + 1].size());
        const BlockCache<T>& c = f.blocks[l];

        const Mat<T> dSum = dOut.cwiseProduct((c.sum.array() > T(0)).template cast<T>().matrix());
        const Mat<T> dH = dSum.cwiseProduct((c.hPre.array() > T(0)).template cast<T>().matrix());
        const Eigen::Index kvRows = static_cast<Eigen::Index>(bp.kv) * lb.cin;

        MatMap<T> gw(&g[lb.convW], layout_.kernelSize * lb.cin, lb.cout);
        RowVecMap<T> gb(&g[lb.convB], lb.cout);
        gw.topRows(kvRows).noalias() += c.z.transpose() * dH;
        gb += dH.colwise().sum();

        if (lb.projected) {
            MatMap<T> gpw(&g[lb.projW], lb.cin, lb.cout);
            RowVecMap<T> gpb(&g[lb.projB], lb.cout);
            gpw.noalias() += c.xSelf.transpose() * dSum;
            gpb += dSum.colwise().sum();
        }
        if (l == 0) {
            break; // the raw input needs no gradient
        }

        ConstMatMap<T> w(&params_[lb.convW], layout_.kernelSize * lb.cin, lb.cout);
        Mat<T> dZ(batch * nOut, kvRows);
        dZ.noalias() = dH * w.topRows(kvRows).transpose();
        Mat<T> dSelf;
        if (lb.projected) {
            ConstMatMap<T> pw(&params_[lb.projW], lb.cin, lb.cout);
            dSelf.resize(batch * nOut, lb.cin);
            dSelf.noalias() = dSum * pw.transpose();
        } else {
            dSelf = dSum;
        }

        Mat<T> dIn = Mat<T>::Zero(batch * nIn, lb.cin);
        for (Eigen::Index b = 0; b < batch; ++b) {
            for (Eigen::Index j = 0; j < nOut; ++j) {
                const Eigen::Index r = b * nOut + j;
                for (int q = 0; q < bp.kv; ++q) {
                    const int s = bp.src[j * bp.kv + q];
                    if (s >= 0) {
                        dIn.row(b * nIn + s) += dZ.row(r).segment(q * lb.cin, lb.cin);
                    }
                }
                dIn.row(b * nIn + bp.self[j]) += dSelf.row(r);
            }
        }
        dOut = std::move(dIn);
    }

    return loss;
}

template <typename T>
void
TcnModel<T>::forwardBatch(const Mat<T>& windows, int windowLen, std::span<T> preds) const
{
    lossAndGradient(windows, windowLen, {}, preds, nullptr);
}

template <typename T>
T
TcnModel<T>::predict(std::span<const T> window, int windowLen) const
{
    const Eigen::Index cols = static_cast<Eigen::Index>(windowLen) * cfg_.inputChannels;
    if (static_cast<Eigen::Index>(window.size()) != cols) {
        throwData("tcn: window has wrong size for the model input");
    }
    Mat<T> w = ConstMatMap<T>(window.data(), 1, cols);
    T out{};
    forwardBatch(w, windowLen, std::span<T>(&out, 1));
    return out;
}

template <typename T>
T
TcnModel<T>::predictReference(const Mat<T>& window) const
{
    if (window.cols() != cfg_.inputChannels || window.rows() < 1) {
        throwData("tcn: reference input has wrong shape");
    }
    Mat<T> x = window;
    for (std::size_t l = 0; l < layout_.blocks.size(); ++l) {
        x = residualBlock<T>(x, blockWeights(l), layout_.blocks[l].dilation);
    }
    Mat<T> a = x.bottomRows(1);
    for (std::size_t i = 0; i < layout_.dense.size(); ++i) {
        const auto& dl = layout_.dense[i];
        ConstMatMap<T> w(&params_[dl.w], dl.in, dl.out);
        ConstRowVecMap<T> bias(&params_[dl.b], dl.out);
        Mat<T> pre = a * w;
        pre.rowwise() += bias;
        a = i + 1 == layout_.dense.size() ? pre : Mat<T>(pre.cwiseMax(T(0)));
    }
    return a(0, 0);
}

template <typename T>
T
rmseLoss(std::span<const T> y, std::span<const T> yhat, std::span<T> grad)
{
    const std::size_t n = y.size();
    if (n == 0) {
        throwData("rmse_loss: empty input");
    }
    if (yhat.size() != n || (!grad.empty() && grad.size() != n)) {
        throwData("rmse_loss: length mismatch");
    }
    T sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const T e = yhat[i] - y[i];
        sse += e * e;
    }
    const T loss = std::sqrt(sse / static_cast<T>(n));
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] = loss > T(0) ? (yhat[i] - y[i]) / (static_cast<T>(n) * loss) : T(0);
    }
    return loss;
}

void
TrainConfig::validate() const
{
    if (!(learningRate > 0.0)) {
        throwConfig("train: learning_rate must be positive");
    }
    if (epochs < 1 || batchSize < 1) {
        throwConfig("train: epochs and batch_size must be >= 1");
    }
    if (patience < 1) {
        throwConfig("train: patience must be >= 1");
    }
    if (!(lrDecay > 0.0 && lrDecay <= 1.0)) {
        throwConfig("train: lr_decay must be in (0, 1]");
    }
}

namespace {

template <typename T>
void
gatherBatch(const SampleProvider& s, std::span<const std::size_t> idx, Mat<T>& windows,
            std::vector<T>& labels, std::vector<double>& scratch)
{
    const Eigen::Index cols = static_cast<Eigen::Index>(s.windowLen()) * s.channels();
    windows.resize(static_cast<Eigen::Index>(idx.size()), cols);
    labels.resize(idx.size());
    scratch.resize(static_cast<std::size_t>(cols));
    for (std::size_t b = 0; b < idx.size(); ++b) {
        s.fill(idx[b], scratch.data());
        for (Eigen::Index c = 0; c < cols; ++c) {
            windows(static_cast<Eigen::Index>(b), c) = static_cast<T>(scratch[c]);
        }
        labels[b] = static_cast<T>(s.label(idx[b]));
    }
}

} // namespace

template <typename T>
std::vector<double>
predictAll(const TcnModel<T>& model, const SampleProvider& samples, int batchSize)
{
    if (samples.channels() != model.config().inputChannels) {
        throwData("predict: sample channels do not match the model input");
    }
    std::vector<double> out(samples.size());
    std::vector<std::size_t> idx;
    Mat<T> windows;
    std::vector<T> labels;
    std::vector<double> scratch;
    std::vector<T> preds;
    for (std::size_t start = 0; start < samples.size(); start += batchSize) {
        const std::size_t end = std::min(samples.size(), start + batchSize);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        gatherBatch(samples, idx, windows, labels, scratch);
        preds.resize(idx.size());
        model.forwardBatch(windows, samples.windowLen(), preds);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out[start + i] = static_cast<double>(preds[i]);
        }
    }
    return out;
}

template <typename T>
TrainResult
train(TcnModel<T>& model, const SampleProvider& trainSet, const SampleProvider* valSet,
      const TrainConfig& cfg, const EpochCallback& onEpoch)
{
    cfg.validate();
    if (trainSet.size() == 0) {
        throwData("train: empty training split");
    }
    if (trainSet.channels() != model.config().inputChannels) {
        throwData("train: sample channels do not match the model input");
    }
    const std::size_t n = trainSet.size();
    const std::size_t np = model.paramCount();
    AlignedVec<T>& theta = model.params();
    std::vector<T> m(np, T(0));
    std::vector<T> v(np, T(0));
    AlignedVec<T> grad;
    AlignedVec<T> best = theta;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    Mat<T> windows;
    std::vector<T> labels;
    std::vector<T> preds;
    std::vector<double> scratch;
    long step = 0;

    TrainResult result;
    result.bestValRmse = std::numeric_limits<double>::infinity();
    int sinceBest = 0;
    double lr = cfg.learningRate;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch, lr *= cfg.lrDecay) {
        std::shuffle(order.begin(), order.end(), rng);
        double sse = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batchSize) {
            const std::size_t end = std::min(n, start + cfg.batchSize);
            std::span<const std::size_t> idx(&order[start], end - start);
            gatherBatch(trainSet, idx, windows, labels, scratch);
            preds.resize(idx.size());
            const T loss = model.lossAndGradient(windows, trainSet.windowLen(), labels, preds, &grad);
            if (!std::isfinite(static_cast<double>(loss))) {
                std::ostringstream os;
                os << "train: loss became non-finite at epoch " << epoch << ", step " << step;
                throwNumeric(os.str());
            }
            sse += static_cast<double>(loss) * static_cast<double>(loss) *
                   static_cast<double>(idx.size());

            ++step;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            const T lrT = static_cast<T>(lr * std::sqrt(bc2) / bc1);
            const T b1 = static_cast<T>(cfg.beta1);
            const T b2 = static_cast<T>(cfg.beta2);
            const T epsHat = static_cast<T>(cfg.epsilon * std::sqrt(bc2));
            for (std::size_t i = 0; i < np; ++i) {
                m[i] = b1 * m[i] + (T(1) - b1) * grad[i];
                v[i] = b2 * v[i] + (T(1) - b2) * grad[i] * grad[i];
                theta[i] -= lrT * m[i] / (std::sqrt(v[i]) + epsHat);
            }
        }

        EpochStats st;
        st.epoch = epoch;
        st.trainRmse = std::sqrt(sse / static_cast<double>(n));
        st.valRmse = std::numeric_limits<double>::quiet_NaN();
        if (valSet && valSet->size() > 0) {
            const auto p = predictAll(model, *valSet);
            double vs = 0.0;
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double e = p[i] - valSet->label(i);
                vs += e * e;
            }
            st.valRmse = std::sqrt(vs / static_cast<double>(p.size()));
            if (!std::isfinite(st.valRmse)) {
                throwNumeric("train: validation RMSE is non-finite at epoch " +
                             std::to_string(epoch));
            }
        }
        result.history.push_back(st);
        if (onEpoch) {
            onEpoch(st);
        }

        if (std::isnan(st.valRmse)) {
            result.bestEpoch = epoch;
            continue;
        }
        if (st.valRmse < result.bestValRmse) {
            result.bestValRmse = st.valRmse;
            result.bestEpoch = epoch;
            best = theta;
            sinceBest = 0;
        } else if (++sinceBest >= cfg.patience) {
            result.earlyStopped = true;
            break;
        }
    }
    if (valSet && valSet->size() > 0) {
        theta = best;
    }
    return result;
}

#define ESHOP_TCN_INSTANTIATE(T)                                                               \
    template Mat<T> dilatedCausalConv<T>(const Mat<T>&, const Mat<T>&, const RowVec<T>&, int);  \
    template Mat<T> residualBlock<T>(const Mat<T>&, const BlockWeights<T>&, int);              \
    template class TcnModel<T>;                                                                \
    template T rmseLoss<T>(std::span<const T>, std::span<const T>, std::span<T>);              \
    template TrainResult train<T>(TcnModel<T>&, const SampleProvider&, const SampleProvider*,  \
                                  const TrainConfig&, const EpochCallback&);                   \
    template std::vector<double> predictAll<T>(const TcnModel<T>&, const SampleProvider&, int);

ESHOP_TCN_INSTANTIATE(float)
ESHOP_TCN_INSTANTIATE(double)

} // namespace eshop::tcn
