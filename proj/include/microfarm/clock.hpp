#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <thread>

namespace microfarm {

class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ms() = 0;
    virtual void sleep_ms(std::int64_t ms) = 0;
};

class SystemClock final : public Clock {
public:
    std::int64_t now_ms() override {
        using namespace std::chrono;
        return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
    }
    void sleep_ms(std::int64_t ms) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
};

// Manually driven time; sleeping just advances it.
class VirtualClock final : public Clock {
public:
    explicit VirtualClock(std::int64_t start_ms = 0) : now_(start_ms) {}

    std::int64_t now_ms() override {
        std::lock_guard lock(mu_);
        return now_;
    }
    void sleep_ms(std::int64_t ms) override { advance(ms); }
    void advance(std::int64_t ms) {
        std::lock_guard lock(mu_);
        now_ += ms;
        slept_ += ms;
    }
    void set(std::int64_t t) {
        std::lock_guard lock(mu_);
        if (t > now_) now_ = t;
    }
    std::int64_t total_slept_ms() {
        std::lock_guard lock(mu_);
        return slept_;
    }

private:
    std::mutex mu_;
    std::int64_t now_;
    std::int64_t slept_ = 0;
};

}  // namespace microfarm
