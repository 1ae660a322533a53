#include <algorithm>
#include <cmath>

#include "nrloop/error.hpp"
#include "nrloop/fit.hpp"

namespace nrloop {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

FitParameter param(std::string name, double value, double lower, double upper, double scale) {
    return {std::move(name), value, lower, upper, scale > 0.0 ? scale : 1.0, false};
}

double magnitude_scale(double v, double fallback) {
    return std::abs(v) > 0.0 ? std::abs(v) : fallback;
}

}  // namespace

ModelParametrization ModelParametrization::four_mode(const FourModeModel& model) {
    ModelParametrization p;
    p.kind_ = Kind::four_mode;
    p.four_mode_base_ = model;
    const char* cs[] = {"C11", "C12", "C21", "C22"};
    for (std::size_t i = 0; i < 4; ++i) {
        p.params_.push_back(param(cs[i], model.cooperativity[i], 0.0, kInf, std::max(1.0, model.cooperativity[i])));
    }
    for (std::size_t k = 0; k < 2; ++k) {
        p.params_.push_back(param("delta" + std::to_string(k + 1), model.delta[k], -kInf, kInf, 1.0));
    }
    for (std::size_t k = 0; k < 2; ++k) {
        p.params_.push_back(param("gamma" + std::to_string(k + 1), model.gamma[k], 0.0, kInf,
                                  magnitude_scale(model.gamma[k], 1e3)));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("kappa" + std::to_string(j + 1), model.kappa[j], 0.0, kInf,
                                  magnitude_scale(model.kappa[j], 1e6)));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("eta" + std::to_string(j + 1), model.eta[j], 0.0, 1.0, 1.0));
    }
    p.params_.push_back(param("phase_offset", 0.0, -kInf, kInf, 1.0));
    for (std::size_t k = 0; k < 2; ++k) {
        p.params_.push_back(param("n_mech" + std::to_string(k + 1), model.mech_occupation[k], 0.0, kInf,
                                  std::max(1.0, model.mech_occupation[k])));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("n_cavity" + std::to_string(j + 1), model.cavity_occupation[j], 0.0, kInf,
                                  std::max(1.0, model.cavity_occupation[j])));
    }
    return p;
}

ModelParametrization ModelParametrization::expanded(const DeviceModel& device, const std::array<double, 4>& coupling,
                                                    const std::array<double, 4>& detuning, double phase_offset,
                                                    const ExpansionOptions& options) {
    ModelParametrization p;
    p.kind_ = Kind::expanded;
    p.device_base_ = device;
    p.expansion_ = options;
    const char* pairs[] = {"11", "12", "21", "22"};
    for (std::size_t i = 0; i < 4; ++i) {
        p.params_.push_back(param(std::string("g") + pairs[i], coupling[i], 0.0, kInf,
                                  magnitude_scale(coupling[i], 1e3)));
    }
    for (std::size_t i = 0; i < 4; ++i) {
        const double gamma = device.gamma[i % 2];
        p.params_.push_back(param(std::string("detuning") + pairs[i], detuning[i], -kInf, kInf,
                                  std::max(std::abs(detuning[i]), gamma > 0.0 ? gamma : 1e3)));
    }
    for (std::size_t k = 0; k < 2; ++k) {
        p.params_.push_back(param("gamma" + std::to_string(k + 1), device.gamma[k], 0.0, kInf,
                                  magnitude_scale(device.gamma[k], 1.0)));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("kappa" + std::to_string(j + 1), device.kappa[j], 0.0, kInf,
                                  magnitude_scale(device.kappa[j], 1e6)));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("eta" + std::to_string(j + 1), device.eta[j], 0.0, 1.0, 1.0));
    }
    p.params_.push_back(param("cross_scale", device.cross_coupling_scale, 0.0, kInf, 1.0));
    p.params_.push_back(param("phase_offset", phase_offset, -kInf, kInf, 1.0));
    for (std::size_t k = 0; k < 2; ++k) {
        p.params_.push_back(param("n_mech" + std::to_string(k + 1), device.mech_occupation[k], 0.0, kInf,
                                  std::max(1.0, device.mech_occupation[k])));
    }
    for (std::size_t j = 0; j < 2; ++j) {
        p.params_.push_back(param("n_cavity" + std::to_string(j + 1), device.cavity_occupation[j], 0.0, kInf,
                                  std::max(1.0, device.cavity_occupation[j])));
    }
    return p;
}

std::size_t ModelParametrization::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].name == name) return i;
    }
    throw InvalidArgument("unknown model parameter '" + std::string(name) + "'");
}

const FitParameter& ModelParametrization::parameter(std::string_view name) const { return params_[index_of(name)]; }

void ModelParametrization::set_value(std::string_view name, double value) {
    if (!std::isfinite(value)) throw InvalidArgument("parameter '" + std::string(name) + "' must be finite");
    params_[index_of(name)].value = value;
}

void ModelParametrization::set_free(std::string_view name, bool free) { params_[index_of(name)].free = free; }

void ModelParametrization::set_bounds(std::string_view name, double lower, double upper) {
    if (!(lower <= upper)) throw InvalidArgument("bounds of '" + std::string(name) + "' are inverted");
    FitParameter& p = params_[index_of(name)];
    p.lower = lower;
    p.upper = upper;
}

std::vector<double> ModelParametrization::values() const {
    std::vector<double> v;
    v.reserve(params_.size());
    for (const FitParameter& p : params_) v.push_back(p.value);
    return v;
}

void ModelParametrization::set_values(std::span<const double> values) {
    if (values.size() != params_.size()) throw InvalidArgument("parameter vector has the wrong length");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i].value = values[i];
}

std::vector<std::size_t> ModelParametrization::free_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (params_[i].free) out.push_back(i);
    }
    return out;
}

FourModeModel ModelParametrization::four_mode_model(std::span<const double> v) const {
    if (kind_ != Kind::four_mode) throw InvalidArgument("not a four-mode parametrization");
    if (v.size() != params_.size()) throw InvalidArgument("parameter vector has the wrong length");
    FourModeModel m = four_mode_base_;
    for (std::size_t i = 0; i < 4; ++i) m.cooperativity[i] = v[i];
    m.delta = {v[4], v[5]};
    m.gamma = {v[6], v[7]};
    m.kappa = {v[8], v[9]};
    m.eta = {v[10], v[11]};
    m.loop_phase = v[12];
    m.mech_occupation = {v[13], v[14]};
    m.cavity_occupation = {v[15], v[16]};
    return m;
}

DeviceModel ModelParametrization::device(std::span<const double> v) const {
    if (kind_ != Kind::expanded) throw InvalidArgument("not an expanded parametrization");
    if (v.size() != params_.size()) throw InvalidArgument("parameter vector has the wrong length");
    DeviceModel d = device_base_;
    d.gamma = {v[8], v[9]};
    d.kappa = {v[10], v[11]};
    d.eta = {v[12], v[13]};
    d.cross_coupling_scale = v[14];
    d.mech_occupation = {v[16], v[17]};
    d.cavity_occupation = {v[18], v[19]};
    return d;
}

DriveSet ModelParametrization::drives(std::span<const double> v) const {
    const DeviceModel d = device(v);
    return make_drives(d, {v[0], v[1], v[2], v[3]}, {v[4], v[5], v[6], v[7]}, v[15]);
}

ModeNetwork ModelParametrization::network(std::span<const double> v) const {
    if (kind_ == Kind::four_mode) return build_four_mode_network(four_mode_model(v));
    return build_expanded_network(device(v), drives(v), expansion_);
}

std::array<double, 4> ModelParametrization::cooperativities(std::span<const double> v) const {
    if (kind_ == Kind::four_mode) return four_mode_model(v).cooperativity;
    return effective(v)->cooperativity;
}

std::optional<EffectiveParameters> ModelParametrization::effective(std::span<const double> v) const {
    if (kind_ == Kind::four_mode) return std::nullopt;
    return effective_parameters(network(v));
}

}  // namespace nrloop
