#pragma once

#include <cstddef>
#include <vector>

namespace eshop {

/** Supervised windows for the regression engine. Windows are W x C, oldest row first. */
class SampleProvider
{
  public:
    virtual ~SampleProvider() = default;
    virtual std::size_t size() const = 0;
    virtual int windowLen() const = 0;
    virtual int channels() const = 0;
    virtual double label(std::size_t i) const = 0;
    virtual void fill(std::size_t i, double* out) const = 0;
};

/** Fully materialized windows; used by tests and small experiments. */
class MemorySamples : public SampleProvider
{
  public:
    MemorySamples(int windowLen, int channels) : windowLen_(windowLen), channels_(channels) {}

    void add(std::vector<double> window, double label)
    {
        windows_.push_back(std::move(window));
        labels_.push_back(label);
    }

    std::size_t size() const override { return labels_.size(); }
    int windowLen() const override { return windowLen_; }
    int channels() const override { return channels_; }
    double label(std::size_t i) const override { return labels_[i]; }
    void fill(std::size_t i, double* out) const override
    {
        const auto& w = windows_[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            out[k] = w[k];
        }
    }

  private:
    int windowLen_;
    int channels_;
    std::vector<std::vector<double>> windows_;
    std::vector<double> labels_;
};

} // namespace eshop
