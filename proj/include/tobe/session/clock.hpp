#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>

#include "tobe/core.hpp"

namespace tobe::session {

/// Paces the session loop. Session time starts at 0 when begin() is called.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual bool simulated() const = 0;
  virtual void begin() {}
  /// Blocks until session time `t`. False if interrupt() cut the wait short.
  virtual bool wait_until(double t) = 0;
  /// Wakes a pending wait_until for good (used on shutdown).
  virtual void interrupt() {}
  /// Session time stands still between pause() and resume().
  virtual void pause() {}
  virtual void resume() {}
};

/// Jumps straight to each requested time: a 15-minute protocol runs as fast
/// as the pipelines can process it.
class SimulatedClock : public Clock {
 public:
  bool simulated() const override { return true; }
  bool wait_until(double) override { return true; }
};

/// Real time, optionally sped up.
class WallClock : public Clock {
 public:
  explicit WallClock(double speed = 1.0) : speed_(speed) {
    require_config(speed > 0.0, "clock speed must be positive");
  }

  bool simulated() const override { return false; }

  void begin() override {
    std::lock_guard lk(mu_);
    start_ = std::chrono::steady_clock::now();
  }

  bool wait_until(double t) override {
    std::unique_lock lk(mu_);
    const auto due = start_ + paused_total_ +
                     std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                         std::chrono::duration<double>(t / speed_));
    return !cv_.wait_until(lk, due, [&] { return interrupted_; });
  }

  void interrupt() override {
    {
      std::lock_guard lk(mu_);
      interrupted_ = true;
    }
    cv_.notify_all();
  }

  void pause() override {
    std::lock_guard lk(mu_);
    paused_at_ = std::chrono::steady_clock::now();
  }

  void resume() override {
    std::lock_guard lk(mu_);
    paused_total_ += std::chrono::steady_clock::now() - paused_at_;
  }

 private:
  double speed_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool interrupted_ = false;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point paused_at_;
  std::chrono::steady_clock::duration paused_total_{};
};

}  // namespace tobe::session
