#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "uda/nn/layers.hpp"

namespace uda::optim {

// lr0 * (1 - t/total)^power, the generator schedule.
double poly_lr(double base_lr, std::uint64_t iter, std::uint64_t total_iters, double power);

// Stochastic gradient with classical momentum and decoupled-from-schedule L2:
//   v <- mu*v + (g + wd*theta);  theta <- theta - lr*v
class SgdMomentum {
public:
    SgdMomentum(double base_lr, double momentum, double weight_decay, double poly_power,
                std::uint64_t total_iters)
        : base_lr_(base_lr), momentum_(momentum), weight_decay_(weight_decay), power_(poly_power),
          total_iters_(total_iters) {}

    // `iter` is the global iteration index (0-based) driving the schedule.
    void step(std::vector<nn::NamedParam>& params, std::uint64_t iter);
    double lr_at(std::uint64_t iter) const { return poly_lr(base_lr_, iter, total_iters_, power_); }

    std::map<std::string, std::vector<double>> serialize(const std::vector<nn::NamedParam>& params) const;
    void deserialize(const std::vector<nn::NamedParam>& params,
                     const std::map<std::string, std::vector<double>>& blobs);

private:
    double base_lr_, momentum_, weight_decay_, power_;
    std::uint64_t total_iters_;
    std::map<std::string, std::vector<double>> velocity_;
};

class Adam {
public:
    Adam(double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}

    void step(std::vector<nn::NamedParam>& params);
    double lr() const { return lr_; }

    std::map<std::string, std::vector<double>> serialize(const std::vector<nn::NamedParam>& params) const;
    void deserialize(const std::vector<nn::NamedParam>& params,
                     const std::map<std::string, std::vector<double>>& blobs);

private:
    double lr_, beta1_, beta2_, weight_decay_, eps_;
    std::uint64_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace uda::optim
