#pragma once

#include "staggercast/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace staggercast {

struct LedgerEntry {
    double time_s = 0.0;
    std::int64_t delta = 0;
    std::string reason;

    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Per-user loyalty points with an append-only log. The balance always
/// equals the sum of the user's log deltas and never goes negative.
/// Not synchronized; wrap it when shared between threads.
class CreditLedger {
public:
    /// Requires points > 0 (PreconditionError otherwise).
    void issue_credits(UserId user, std::int64_t points, std::string reason, double time_s = 0.0);
    /// Requires 0 < points <= balance; on InsufficientCredits the ledger is unchanged.
    void redeem_credits(UserId user, std::int64_t points, std::string reason, double time_s = 0.0);

    std::int64_t balance(UserId user) const;
    std::span<const LedgerEntry> log(UserId user) const;
    std::int64_t total_issued() const { return total_issued_; }
    std::int64_t total_redeemed() const { return total_redeemed_; }
    std::vector<UserId> users() const;

private:
    struct Account {
        std::int64_t balance = 0;
        std::vector<LedgerEntry> log;
    };
    std::map<UserId, Account> accounts_;
    std::int64_t total_issued_ = 0;
    std::int64_t total_redeemed_ = 0;
};

}  // namespace staggercast
