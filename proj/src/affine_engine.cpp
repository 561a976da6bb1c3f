#include "standda/affine_engine.hpp"

#include <json.hpp>

namespace standda {

AffineTriple affine_matmul(const AffineTriple& t, const Matrix& w) {
    AffineTriple out;
    SequentialBackend().matmul(t, w, out);
    return out;
}

AffineTriple affine_add_bias(const AffineTriple& t, const Vector& c) {
    AffineTriple out = t;
    SequentialBackend().add_bias(out, c);
    return out;
}

std::pair<AffineTriple, Interval> si_relu(const AffineTriple& t, const Interval& interval) {
    AffineTriple out;
    Interval iv = SequentialBackend().si_relu(t, out, interval, nullptr);
    return {std::move(out), iv};
}

AffineEngine::AffineEngine(std::shared_ptr<const Backend> backend) : backend_(std::move(backend)) {}

AffineEngine::Pass AffineEngine::run(const PiecewiseLinearNetwork& net, const AffineTriple& input,
                                     Interval start, std::optional<std::size_t> tapAfter) {
    require_dims(input.cols() == net.input_dim(),
                 "conditioned_forward: input has " + std::to_string(input.cols()) +
                     " columns, network expects " + std::to_string(net.input_dim()));
    const auto& layers = net.layers();
    auto& buffers = workspaces_[&net];
    if (buffers.size() != layers.size()) buffers.assign(layers.size(), AffineTriple{});
    if (recording_) recorded_.clear();

    Pass pass;
    pass.interval = start;
    const AffineTriple* current = &input;
    if (tapAfter && *tapAfter >= layers.size())
        throw std::out_of_range("conditioned_forward: tap layer out of range");

    for (std::size_t l = 0; l < layers.size(); ++l) {
        AffineTriple& out = buffers[l];
        if (const auto* a = std::get_if<AffineLayer>(&layers[l])) {
            backend_->matmul(*current, a->weight, out);
            backend_->add_bias(out, a->bias);
        } else {
            LinearConstraintSet* rec = nullptr;
            if (recording_) {
                recorded_.push_back({l, {}});
                rec = &recorded_.back().constraints;
            }
            pass.interval = backend_->si_relu(*current, out, pass.interval, rec);
            if (pass.interval.empty())
                throw PatternError(l, "empty conditioning interval at layer " + std::to_string(l));
        }
        current = &out;
        if (tapAfter && *tapAfter == l) pass.tap = current;
    }
    pass.output = current;
    return pass;
}

std::string AffineEngine::recorded_json() const {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& lc : recorded_)
        doc.push_back({{"layer", lc.layer}, {"p", lc.constraints.coeffs}, {"q", lc.constraints.bounds}});
    return doc.dump();
}

ConditionedResult conditioned_forward(const PiecewiseLinearNetwork& net, const AffineTriple& t0,
                                      const Interval& interval0, std::optional<std::size_t> tapAfter,
                                      std::shared_ptr<const Backend> backend) {
    AffineEngine engine(backend ? std::move(backend) : std::make_shared<SequentialBackend>());
    const auto pass = engine.run(net, t0, interval0, tapAfter);
    ConditionedResult result{*pass.output, pass.interval, std::nullopt};
    if (pass.tap) result.tap = *pass.tap;
    return result;
}

}  // namespace standda
