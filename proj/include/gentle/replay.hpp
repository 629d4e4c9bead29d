#pragma once

// Uniform ring-buffer replay.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "gentle/rewards.hpp"

namespace gentle {

struct Transition {
    std::vector<double> state;
    std::vector<double> action;
    std::vector<double> next_state;
    RewardBreakdown rewards;
    bool terminal = false;
};

class ReplayBuffer {
 public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be > 0");
        data_.reserve(capacity_);
    }

    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[write_] = std::move(t);  // oldest overwritten
        }
        write_ = (write_ + 1) % capacity_;
    }

    // Uniform sampling with replacement.
    std::vector<const Transition*> sample(std::size_t batch_size, std::mt19937_64& rng) const {
        if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling an empty buffer");
        std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
        std::vector<const Transition*> batch;
        batch.reserve(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&data_[pick(rng)]);
        return batch;
    }

    // Mutable variant for reward relabeling at learning time.
    std::vector<Transition*> sample_mutable(std::size_t batch_size, std::mt19937_64& rng) {
        if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling an empty buffer");
        std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
        std::vector<Transition*> batch;
        batch.reserve(batch_size);
        for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&data_[pick(rng)]);
        return batch;
    }

    const Transition& at(std::size_t i) const { return data_[i]; }

 private:
    std::size_t capacity_;
    std::size_t write_ = 0;
    std::vector<Transition> data_;
};

}  // namespace gentle
