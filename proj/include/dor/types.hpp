#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dor {

using AgentIndex = std::size_t;
using JointState = std::uint32_t;
using JointAction = std::uint32_t;

/// Coalitions are bitmasks over agent indices (bit i = agent i).
using CoalitionMask = std::uint32_t;

/// Hard cap on agent count for exact Shapley enumeration.
inline constexpr std::size_t kMaxShapleyAgents = 20;

/// Tolerance for probability row sums and report invariants.
inline constexpr double kProbTolerance = 1e-9;

/// Thrown when a resource guard refuses to build a table (CLI exit 3).
struct guard_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Thrown when a stated invariant is observed broken at runtime.
struct invariant_error : std::logic_error {
    using std::logic_error::logic_error;
};

/// Mixed-radix index over per-agent finite sets. Agent 0 is the most
/// significant digit, so enumeration in increasing joint index is
/// lexicographic in (agent 0, agent 1, ...).
class IndexSpace {
  public:
    IndexSpace() = default;

    explicit IndexSpace(std::vector<std::uint32_t> sizes) : sizes_(std::move(sizes)) {
        strides_.assign(sizes_.size(), 1);
        total_ = 1;
        for (std::size_t i = sizes_.size(); i-- > 0;) {
            if (sizes_[i] == 0) throw std::invalid_argument("IndexSpace: empty component set");
            strides_[i] = total_;
            total_ *= sizes_[i];
            if (total_ > UINT32_MAX)
                throw guard_error("IndexSpace: joint space exceeds 2^32 elements");
        }
        if (sizes_.empty()) total_ = 1;
    }

    std::size_t rank() const { return sizes_.size(); }
    std::uint64_t size() const { return total_; }
    std::uint32_t component_size(AgentIndex i) const { return sizes_.at(i); }
    const std::vector<std::uint32_t>& component_sizes() const { return sizes_; }

    std::uint32_t encode(std::span<const std::uint32_t> digits) const {
        if (digits.size() != sizes_.size())
            throw std::invalid_argument("IndexSpace::encode: rank mismatch");
        std::uint64_t idx = 0;
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            if (digits[i] >= sizes_[i])
                throw std::out_of_range("IndexSpace::encode: digit out of range");
            idx += std::uint64_t(digits[i]) * strides_[i];
        }
        return static_cast<std::uint32_t>(idx);
    }

    void decode(std::uint32_t index, std::span<std::uint32_t> out) const {
        if (index >= total_) throw std::out_of_range("IndexSpace::decode: index out of range");
        if (out.size() != sizes_.size())
            throw std::invalid_argument("IndexSpace::decode: rank mismatch");
        std::uint64_t rest = index;
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            out[i] = static_cast<std::uint32_t>(rest / strides_[i]);
            rest %= strides_[i];
        }
    }

    std::vector<std::uint32_t> decode(std::uint32_t index) const {
        std::vector<std::uint32_t> out(sizes_.size());
        decode(index, out);
        return out;
    }

    std::uint32_t digit(std::uint32_t index, AgentIndex i) const {
        if (index >= total_) throw std::out_of_range("IndexSpace::digit: index out of range");
        return static_cast<std::uint32_t>((index / strides_.at(i)) % sizes_[i]);
    }

    /// Returns `index` with agent i's digit replaced by `value`.
    std::uint32_t with_digit(std::uint32_t index, AgentIndex i, std::uint32_t value) const {
        if (value >= sizes_.at(i))
            throw std::out_of_range("IndexSpace::with_digit: digit out of range");
        std::uint32_t old = digit(index, i);
        std::int64_t delta = (std::int64_t(value) - std::int64_t(old)) * std::int64_t(strides_[i]);
        return static_cast<std::uint32_t>(std::int64_t(index) + delta);
    }

  private:
    std::vector<std::uint32_t> sizes_;
    std::vector<std::uint64_t> strides_;
    std::uint64_t total_ = 1;
};

inline CoalitionMask full_mask(std::size_t n) {
    return n >= 32 ? ~CoalitionMask(0) : (CoalitionMask(1) << n) - 1;
}

}  // namespace dor
