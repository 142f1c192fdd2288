#include "staggercast/credit_ledger.hpp"

#include "staggercast/errors.hpp"

namespace staggercast {

void CreditLedger::issue_credits(UserId user, std::int64_t points, std::string reason, double time_s) {
    if (points <= 0) throw PreconditionError("issued points must be positive");
    auto& account = accounts_[user];
    account.balance += points;
    account.log.push_back({time_s, points, std::move(reason)});
    total_issued_ += points;
}

void CreditLedger::redeem_credits(UserId user, std::int64_t points, std::string reason, double time_s) {
    if (points <= 0) throw PreconditionError("redeemed points must be positive");
    auto it = accounts_.find(user);
    const std::int64_t available = it == accounts_.end() ? 0 : it->second.balance;
    if (points > available) {
        throw InsufficientCredits("user " + std::to_string(user) + " has " + std::to_string(available) +
                                  " points, cannot redeem " + std::to_string(points));
    }
    it->second.balance -= points;
    it->second.log.push_back({time_s, -points, std::move(reason)});
    total_redeemed_ += points;
}

std::int64_t CreditLedger::balance(UserId user) const {
    auto it = accounts_.find(user);
    return it == accounts_.end() ? 0 : it->second.balance;
}

std::span<const LedgerEntry> CreditLedger::log(UserId user) const {
    auto it = accounts_.find(user);
    if (it == accounts_.end()) return {};
    return it->second.log;
}

std::vector<UserId> CreditLedger::users() const {
    std::vector<UserId> out;
    out.reserve(accounts_.size());
    for (const auto& [user, _] : accounts_) out.push_back(user);
    return out;
}

}  // namespace staggercast
