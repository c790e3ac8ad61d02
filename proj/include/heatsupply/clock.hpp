#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>

namespace heatsupply {

/// Source of wall time in (fractional) unix seconds.
class Clock {
public:
    virtual ~Clock() = default;
    virtual double now() const = 0;

    std::uint64_t now_seconds() const {
        const double t = now();
        return t <= 0.0 ? 0 : static_cast<std::uint64_t>(std::floor(t));
    }
};

class SystemClock final : public Clock {
public:
    double now() const override {
        using namespace std::chrono;
        return duration<double>(system_clock::now().time_since_epoch()).count();
    }
};

/// Manually driven clock for tests and fast-forward simulation.
class SimClock final : public Clock {
public:
    explicit SimClock(double start = 0.0) : t_(start) {}

    double now() const override { return t_.load(std::memory_order_acquire); }
    void set(double t) { t_.store(t, std::memory_order_release); }
    void advance(double dt) { set(now() + dt); }

private:
    std::atomic<double> t_;
};

}  // namespace heatsupply
