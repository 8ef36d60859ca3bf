// Copyright (c) 2026, metaphor-forge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

namespace mforge {

/// Memo whose concurrent misses on one key coalesce into a single
/// computation. Failed computations are forgotten, so a later call
/// retries; every waiter of the failed flight sees the same exception.
template <typename Key, typename Value>
class SingleFlight {
public:
    /// Returns the value and whether this call ran `compute` itself.
    std::pair<Value, bool> get_or_compute(const Key& key, const std::function<Value()>& compute) {
        std::shared_future<Value> flight;
        std::shared_ptr<std::promise<Value>> owner;
        {
            std::lock_guard lock(mu_);
            if (auto it = entries_.find(key); it != entries_.end()) {
                flight = it->second;
            } else {
                owner = std::make_shared<std::promise<Value>>();
                flight = owner->get_future().share();
                entries_.emplace(key, flight);
            }
        }
        if (!owner) return {flight.get(), false};
        try {
            owner->set_value(compute());
        } catch (...) {
            {
                std::lock_guard lock(mu_);
                entries_.erase(key);
            }
            owner->set_exception(std::current_exception());
            throw;
        }
        return {flight.get(), true};
    }

    /// Inserts a value computed elsewhere (e.g. loaded from disk) if absent.
    void seed(const Key& key, Value value) {
        std::promise<Value> p;
        p.set_value(std::move(value));
        std::lock_guard lock(mu_);
        entries_.emplace(key, p.get_future().share());
    }

    /// Completed value if present and ready.
    std::optional<Value> peek(const Key& key) const {
        std::lock_guard lock(mu_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        if (it->second.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return std::nullopt;
        return it->second.get();
    }

    std::size_t size() const {
        std::lock_guard lock(mu_);
        return entries_.size();
    }

private:
    mutable std::mutex mu_;
    std::map<Key, std::shared_future<Value>> entries_;
};

} // namespace mforge
