#include "uda/optim.hpp"

#include <cmath>

namespace uda::optim {

double poly_lr(double base_lr, std::uint64_t iter, std::uint64_t total_iters, double power) {
    double frac = total_iters == 0 ? 0.0 : static_cast<double>(iter) / static_cast<double>(total_iters);
    if (frac > 1.0) frac = 1.0;
    return base_lr * std::pow(1.0 - frac, power);
}

void SgdMomentum::step(std::vector<nn::NamedParam>& params, std::uint64_t iter) {
    const double lr = lr_at(iter);
    for (auto& p : params) {
        auto& vel = velocity_[p.name];
        if (vel.size() != p.value->size()) vel.assign(p.value->size(), 0.0);
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            double g = (*p.grad)[i] + weight_decay_ * (*p.value)[i];
            vel[i] = momentum_ * vel[i] + g;
            (*p.value)[i] -= lr * vel[i];
        }
    }
}

std::map<std::string, std::vector<double>> SgdMomentum::serialize(
    const std::vector<nn::NamedParam>& params) const {
    std::map<std::string, std::vector<double>> blobs;
    for (const auto& p : params) {
        auto it = velocity_.find(p.name);
        if (it != velocity_.end()) blobs["optG/v/" + p.name] = it->second;
    }
    return blobs;
}

void SgdMomentum::deserialize(const std::vector<nn::NamedParam>& params,
                              const std::map<std::string, std::vector<double>>& blobs) {
    for (const auto& p : params) {
        auto it = blobs.find("optG/v/" + p.name);
        if (it != blobs.end()) velocity_[p.name] = it->second;
    }
}

void Adam::step(std::vector<nn::NamedParam>& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& p : params) {
        auto& m = m_[p.name];
        auto& v = v_[p.name];
        if (m.size() != p.value->size()) m.assign(p.value->size(), 0.0);
        if (v.size() != p.value->size()) v.assign(p.value->size(), 0.0);
        for (std::size_t i = 0; i < p.value->size(); ++i) {
            double g = (*p.grad)[i] + weight_decay_ * (*p.value)[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            (*p.value)[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

std::map<std::string, std::vector<double>> Adam::serialize(
    const std::vector<nn::NamedParam>& params) const {
    std::map<std::string, std::vector<double>> blobs;
    blobs["optD/t"] = {static_cast<double>(t_)};
    for (const auto& p : params) {
        auto im = m_.find(p.name);
        auto iv = v_.find(p.name);
        if (im != m_.end()) blobs["optD/m/" + p.name] = im->second;
        if (iv != v_.end()) blobs["optD/v/" + p.name] = iv->second;
    }
    return blobs;
}

void Adam::deserialize(const std::vector<nn::NamedParam>& params,
                       const std::map<std::string, std::vector<double>>& blobs) {
    auto it = blobs.find("optD/t");
    if (it != blobs.end() && !it->second.empty()) t_ = static_cast<std::uint64_t>(it->second[0]);
    for (const auto& p : params) {
        auto im = blobs.find("optD/m/" + p.name);
        auto iv = blobs.find("optD/v/" + p.name);
        if (im != blobs.end()) m_[p.name] = im->second;
        if (iv != blobs.end()) v_[p.name] = iv->second;
    }
}

}  // namespace uda::optim
