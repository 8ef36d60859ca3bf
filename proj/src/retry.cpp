// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#include "mforge/retry.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mforge/errors.hpp"

namespace mforge {

namespace {

Error describe_failure(const HttpOutcome& o) {
    if (o.timed_out) return Error(ErrorCode::Timeout, "request timed out");
    if (o.status != 0)
        return Error(ErrorCode::HttpStatus, "backend returned HTTP " + std::to_string(o.status), o.body, o.status);
    return Error(ErrorCode::Transport, o.transport_error.empty() ? "connection failed" : o.transport_error);
}

} // namespace

RetryPolicy::RetryPolicy(int max_retries, double backoff_s, Sleeper sleeper)
    : max_retries_(std::clamp(max_retries, 0, 10)), backoff_s_(std::max(0.0, backoff_s)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](std::chrono::duration<double> d) { std::this_thread::sleep_for(d); };
    }
}

HttpOutcome RetryPolicy::run(const std::function<HttpOutcome()>& attempt, RetryStats* stats) const {
    RetryStats local;
    RetryStats& s = stats ? *stats : local;
    s = {};
    for (int k = 0;; ++k) {
        ++s.attempts;
        HttpOutcome outcome = attempt();
        if (outcome.ok()) return outcome;
        if (outcome.client_error()) throw describe_failure(outcome);
        if (k >= max_retries_) {
            Error last = describe_failure(outcome);
            if (max_retries_ == 0) throw last;
            throw Error(ErrorCode::ExhaustedRetries,
                        "gave up after " + std::to_string(s.retries) + " retries (" + last.what() + ")", {},
                        outcome.status);
        }
        if (backoff_s_ > 0.0) sleeper_(std::chrono::duration<double>(backoff_s_ * std::ldexp(1.0, k)));
        ++s.retries;
    }
}

AdmissionGate::AdmissionGate(int capacity) : capacity_(std::max(1, capacity)) {}

AdmissionGate::Permit AdmissionGate::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [this] { return in_flight_ < capacity_; });
    ++in_flight_;
    peak_ = std::max(peak_, in_flight_);
    return Permit(this);
}

void AdmissionGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

int AdmissionGate::in_flight() const {
    std::lock_guard lock(mu_);
    return in_flight_;
}

int AdmissionGate::peak() const {
    std::lock_guard lock(mu_);
    return peak_;
}

} // namespace mforge
