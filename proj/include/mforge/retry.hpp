// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <string>

namespace mforge {

/// Result of a single HTTP attempt. `status == 0` means no response arrived.
struct HttpOutcome {
    int status = 0;
    std::string body;
    bool timed_out = false;
    std::string transport_error;

    bool ok() const noexcept { return status >= 200 && status < 300; }
    bool client_error() const noexcept { return status >= 400 && status < 500; }
};

struct RetryStats {
    int attempts = 0;
    int retries = 0;
};

using Sleeper = std::function<void(std::chrono::duration<double>)>;

/// Exponential backoff: wait backoff * 2^k before retry k+1. 4xx responses
/// fail immediately; timeouts, transport failures and 5xx are retried up
/// to `max_retries` times.
class RetryPolicy {
public:
    RetryPolicy(int max_retries, double backoff_s, Sleeper sleeper = {});

    /// Returns the first successful outcome. Throws Error{HttpStatus} for
    /// 4xx, Error{ExhaustedRetries} once retries run out, or the plain
    /// Error{Timeout}/{HttpStatus}/{Transport} when max_retries is 0.
    HttpOutcome run(const std::function<HttpOutcome()>& attempt, RetryStats* stats = nullptr) const;

    int max_retries() const noexcept { return max_retries_; }

private:
    int max_retries_;
    double backoff_s_;
    Sleeper sleeper_;
};

/// Counting gate capping concurrent requests to one backend.
class AdmissionGate {
public:
    explicit AdmissionGate(int capacity);

    class Permit {
    public:
        explicit Permit(AdmissionGate* gate) : gate_(gate) {}
        Permit(Permit&& other) noexcept : gate_(other.gate_) { other.gate_ = nullptr; }
        Permit(const Permit&) = delete;
        Permit& operator=(const Permit&) = delete;
        Permit& operator=(Permit&&) = delete;
        ~Permit() {
            if (gate_) gate_->release();
        }

    private:
        AdmissionGate* gate_;
    };

    Permit acquire();
    int capacity() const noexcept { return capacity_; }
    int in_flight() const;
    /// Highest simultaneous admission count observed.
    int peak() const;

private:
    void release();

    const int capacity_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    int peak_ = 0;
};

} // namespace mforge
