#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>

namespace icsum::detail {

/// Error from a remote call. status 0 means the request never produced an
/// HTTP response (transport failure). Messages never contain credentials.
struct HttpError : std::runtime_error {
    HttpError(int status_, const std::string& message) : std::runtime_error(message), status(status_) {}
    int status;
};

inline bool no_network() {
    const char* v = std::getenv("NO_NETWORK");
    return v != nullptr && std::string_view(v) == "1";
}

inline void require_network(const char* what) {
    if (no_network()) {
        throw HttpError(0, std::string(what) + " disabled: NO_NETWORK=1 forces offline components");
    }
}

struct UrlParts {
    std::string base;        // scheme://host[:port]
    std::string path_prefix; // "" or "/prefix"
};

inline UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("endpoint URL must include a scheme: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

/// Bounds concurrent in-flight requests per endpoint, process-wide.
class ConcurrencyGate {
  public:
    static ConcurrencyGate& instance() {
        static ConcurrencyGate gate;
        return gate;
    }

    class Guard {
      public:
        Guard(ConcurrencyGate& gate, std::string key, int limit)
            : gate_(gate), key_(std::move(key)) {
            std::unique_lock lock(gate_.mutex_);
            gate_.cv_.wait(lock, [&] { return gate_.in_flight_[key_] < limit; });
            ++gate_.in_flight_[key_];
        }
        ~Guard() {
            {
                std::lock_guard lock(gate_.mutex_);
                --gate_.in_flight_[key_];
            }
            gate_.cv_.notify_all();
        }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

      private:
        ConcurrencyGate& gate_;
        std::string key_;
    };

  private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::map<std::string, int> in_flight_;
};

/// Enforces a per-minute request budget by spacing request starts.
class RateLimiter {
  public:
    explicit RateLimiter(int requests_per_minute = 0) : rpm_(requests_per_minute) {}

    void wait_turn() {
        if (rpm_ <= 0) return;
        const auto interval = std::chrono::milliseconds(60000 / rpm_);
        std::unique_lock lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        const auto earliest = last_ + interval;
        if (now < earliest) {
            lock.unlock();
            std::this_thread::sleep_for(earliest - now);
            lock.lock();
        }
        last_ = std::chrono::steady_clock::now();
    }

  private:
    int rpm_;
    std::mutex mutex_;
    std::chrono::steady_clock::time_point last_{};
};

struct RetryPolicy {
    int max_retries = 3;
    int backoff_base_ms = 500;
    int max_in_flight = 4;
};

inline bool transient_status(int status) { return status == 429 || (status >= 500 && status < 600); }

/// POSTs a JSON body, retrying 429/5xx and transport failures with
/// exponential backoff (base, 2x base, 4x base, ...). Returns the 200 body.
/// Throws HttpError otherwise; 401/403 fail immediately as auth errors.
inline std::string post_json(const std::string& endpoint, const std::string& path,
                             const std::string& body, const httplib::Headers& headers,
                             const RetryPolicy& policy) {
    const UrlParts url = split_url(endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);

    const std::string full_path = url.path_prefix + path;
    std::string last_failure = "no attempt made";
    int last_status = 0;
    for (int attempt = 0; attempt <= policy.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(policy.backoff_base_ms) * (1LL << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        ConcurrencyGate::Guard guard(ConcurrencyGate::instance(), url.base, policy.max_in_flight);
        auto res = client.Post(full_path, headers, body, "application/json");
        if (!res) {
            last_status = 0;
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue; // transient
        }
        if (res->status == 200) return res->body;
        if (res->status == 401 || res->status == 403) {
            throw HttpError(res->status, "authentication failed (HTTP " + std::to_string(res->status) +
                                             ") calling " + full_path);
        }
        if (transient_status(res->status)) {
            last_status = res->status;
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        throw HttpError(res->status, "HTTP " + std::to_string(res->status) + " calling " + full_path +
                                         ": " + res->body.substr(0, 200));
    }
    throw HttpError(last_status, "request to " + full_path + " failed after " +
                                     std::to_string(policy.max_retries + 1) +
                                     " attempts; last failure: " + last_failure);
}

} // namespace icsum::detail
