#include <doctest.h>

#include <staggercast/credit_ledger.hpp>
#include <staggercast/errors.hpp>

using namespace staggercast;

TEST_CASE("issue and redeem") {
    CreditLedger ledger;
    ledger.issue_credits(7, 10, "accept", 1.0);
    ledger.issue_credits(7, 5, "accept", 2.0);
    ledger.redeem_credits(7, 12, "upgrade", 3.0);
    CHECK(ledger.balance(7) == 3);
    CHECK(ledger.log(7).size() == 3);
    CHECK(ledger.total_issued() == 15);
    CHECK(ledger.total_redeemed() == 12);
    CHECK(ledger.balance(8) == 0);
    CHECK(ledger.log(8).empty());
}

TEST_CASE("insufficient credits leave the ledger unchanged") {
    CreditLedger ledger;
    ledger.issue_credits(1, 4, "accept");
    CHECK_THROWS_AS(ledger.redeem_credits(1, 5, "too much"), InsufficientCredits);
    CHECK(ledger.balance(1) == 4);
    CHECK(ledger.log(1).size() == 1);
    CHECK(ledger.total_redeemed() == 0);
}

TEST_CASE("non-positive amounts are rejected") {
    CreditLedger ledger;
    CHECK_THROWS_AS(ledger.issue_credits(1, 0, "x"), PreconditionError);
    CHECK_THROWS_AS(ledger.issue_credits(1, -3, "x"), PreconditionError);
    CHECK_THROWS_AS(ledger.redeem_credits(1, 0, "x"), PreconditionError);
}

TEST_CASE("balance equals the sum of the log") {
    CreditLedger ledger;
    for (int i = 1; i <= 50; ++i) ledger.issue_credits(static_cast<UserId>(i % 5), i, "accept");
    for (UserId u : ledger.users()) {
        std::int64_t sum = 0;
        for (const auto& e : ledger.log(u)) sum += e.delta;
        CHECK(sum == ledger.balance(u));
    }
}
