//! The bank: deposit interest, mortgage origination and servicing.

use crate::goods::draw_household;
use crate::ids::{HouseholdId, LoanId};
use crate::money::Money;
use crate::params::SimParams;
use crate::state::{Loan, World};

pub const MAX_TERM_MONTHS: u32 = 360;

/// Loan term: 360 months or until the oldest member turns 75, whichever is sooner.
pub fn loan_term(months_to_75: u32) -> u32 {
    months_to_75.min(MAX_TERM_MONTHS)
}

/// Largest loan a household can carry: `PI * chi * m`.
pub fn mortgage_cap(pi: f64, chi: f64, term: u32) -> f64 {
    (pi * chi * term as f64).max(0.0)
}

/// Fixed monthly payment of an annuity.
pub fn annuity_payment(principal: f64, rate: f64, months: u32) -> f64 {
    if months == 0 {
        return principal;
    }
    if rate == 0.0 {
        return principal / months as f64;
    }
    principal * rate / (1.0 - (1.0 + rate).powi(-(months as i32)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decline {
    NonPositiveBalance,
    ExistingMortgage,
    BookLimit,
    NoCapacity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Approved(Money),
    Declined(Decline),
}

#[derive(Clone, Copy, Debug)]
pub struct BankView {
    pub balance: Money,
    pub book: Money,
    pub deposits: Money,
}

/// The three lending criteria plus the household's repayment capacity.
pub fn evaluate_mortgage(
    bank: BankView,
    has_mortgage: bool,
    requested: Money,
    cap: Money,
    nu: f64,
) -> Decision {
    if !bank.balance.is_positive() {
        return Decision::Declined(Decline::NonPositiveBalance);
    }
    if has_mortgage {
        return Decision::Declined(Decline::ExistingMortgage);
    }
    let amount = requested.min(cap);
    if !amount.is_positive() {
        return Decision::Declined(Decline::NoCapacity);
    }
    if (bank.book + amount).minor() as f64 > nu * bank.deposits.minor() as f64 {
        return Decision::Declined(Decline::BookLimit);
    }
    Decision::Approved(amount)
}

impl World {
    pub fn bank_view(&self) -> BankView {
        let deposits = self.deposits();
        BankView {
            balance: deposits + self.bank.equity,
            book: self.loans.values().map(|l| l.balance + l.arrears).sum(),
            deposits,
        }
    }

    /// Pre-approval estimate of the loan a household could get.
    pub fn credit_estimate(&self, hid: HouseholdId, p: &SimParams) -> Money {
        let h = &self.households[&hid];
        Money::from_units(mortgage_cap(h.pi, p.chi, loan_term(self.months_to_75(h))))
    }

    /// Books a new loan. The principal leaves the bank's equity; the caller
    /// credits it to the seller.
    pub fn originate(&mut self, hid: HouseholdId, amount: Money, rate: f64) -> LoanId {
        let term = loan_term(self.months_to_75(&self.households[&hid])).max(1);
        let id = self.ids.loan();
        let payment = Money::from_units(annuity_payment(amount.to_units(), rate, term))
            .max(Money::from_minor(1));
        self.loans.insert(
            id,
            Loan {
                id,
                household: hid,
                original: amount,
                balance: amount,
                rate,
                months_left: term,
                payment,
                arrears: Money::ZERO,
            },
        );
        self.bank.equity -= amount;
        let h = self.households.get_mut(&hid).expect("borrower exists");
        debug_assert!(h.mortgage.is_none());
        h.mortgage = Some(id);
        self.activity.mortgages += 1;
        let view = self.bank_view();
        let ratio = if view.deposits.is_positive() {
            view.book.to_units() / view.deposits.to_units()
        } else {
            f64::INFINITY
        };
        self.credit.book_ratios.push(ratio);
        let live = self.loans.values().filter(|l| l.household == hid).count() as u32;
        self.credit.max_live_per_household = self.credit.max_live_per_household.max(live);
        id
    }
}

/// Scheduled instalment for the month and the new balance after it accrues.
pub fn schedule(loan: &Loan) -> (Money, Money) {
    let interest = loan.balance.scale(loan.rate);
    let owed = loan.balance + interest;
    let due = if loan.months_left <= 1 {
        owed
    } else {
        loan.payment.min(owed)
    };
    (due, owed - due)
}

/// Collects instalments. Shortfalls accumulate as arrears that later months
/// try to recover first.
pub fn service_loans(w: &mut World) {
    let ids: Vec<LoanId> = w.loans.keys().copied().collect();
    for id in ids {
        let loan = &w.loans[&id];
        let hid = loan.household;
        let (due, balance) = schedule(loan);
        let owed = loan.arrears + due;
        let paid = draw_household(w, hid, owed);
        w.bank.equity += paid;
        let loan = w.loans.get_mut(&id).expect("loan exists");
        loan.balance = balance;
        loan.arrears = owed - paid;
        loan.months_left = loan.months_left.saturating_sub(1);
        if loan.balance.is_zero() && loan.arrears.is_zero() {
            w.loans.remove(&id);
            if let Some(h) = w.households.get_mut(&hid) {
                h.mortgage = None;
            }
        }
    }
}

/// Credits the baseline rate on savings. Reserve money earns nothing.
pub fn pay_deposit_interest(w: &mut World, r: f64) {
    for h in w.households.values_mut() {
        let credit = h.savings.scale(r);
        h.savings += credit;
        w.bank.equity -= credit;
    }
}

/// Compounds a deposit for `months` months at rate `r`.
pub fn compound(deposit: Money, r: f64, months: u32) -> Money {
    (0..months).fold(deposit, |d, _| d + d.scale(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> BankView {
        BankView {
            balance: Money::from_units(1000.0),
            book: Money::ZERO,
            deposits: Money::from_units(1000.0),
        }
    }

    #[test]
    fn existing_mortgage_declines() {
        let d = evaluate_mortgage(
            bank(),
            true,
            Money::from_units(10.0),
            Money::from_units(100.0),
            0.7,
        );
        assert_eq!(d, Decision::Declined(Decline::ExistingMortgage));
    }

    #[test]
    fn negative_balance_and_book_limit() {
        let mut b = bank();
        b.balance = Money::ZERO;
        let d = evaluate_mortgage(
            b,
            false,
            Money::from_units(10.0),
            Money::from_units(100.0),
            0.7,
        );
        assert_eq!(d, Decision::Declined(Decline::NonPositiveBalance));
        let d = evaluate_mortgage(
            bank(),
            false,
            Money::from_units(800.0),
            Money::from_units(900.0),
            0.7,
        );
        assert_eq!(d, Decision::Declined(Decline::BookLimit));
        let d = evaluate_mortgage(
            bank(),
            false,
            Money::from_units(800.0),
            Money::from_units(50.0),
            0.7,
        );
        assert_eq!(d, Decision::Approved(Money::from_units(50.0)));
    }

    #[test]
    fn cap_and_term() {
        assert_eq!(mortgage_cap(10.0, 0.5, 360), 1800.0);
        assert_eq!(loan_term(75 * 12), 360);
        // Oldest member aged 74 years and 0 months.
        let m = loan_term(75 * 12 - 74 * 12);
        assert_eq!(m, 12);
        assert_eq!(mortgage_cap(10.0, 0.5, m), 60.0);
    }

    #[test]
    fn deposit_interest_compounds() {
        assert_eq!(compound(Money::ZERO, 0.01, 1), Money::ZERO);
        assert_eq!(
            compound(Money::from_units(1000.0), 0.01, 1),
            Money::from_units(1010.0)
        );
        assert_eq!(
            compound(Money::from_units(1000.0), 0.01, 2),
            Money::from_units(1020.1)
        );
    }

    #[test]
    fn annuity_repays_principal() {
        let (principal, rate, n) = (100.0, 0.01, 12);
        let pmt = annuity_payment(principal, rate, n);
        let mut loan = Loan {
            id: LoanId(0),
            household: HouseholdId(0),
            original: Money::from_units(principal),
            balance: Money::from_units(principal),
            rate,
            months_left: n,
            payment: Money::from_units(pmt),
            arrears: Money::ZERO,
        };
        let mut paid = Money::ZERO;
        for _ in 0..n {
            let (due, bal) = schedule(&loan);
            paid += due;
            loan.balance = bal;
            loan.months_left -= 1;
        }
        assert_eq!(loan.balance, Money::ZERO);
        let expected = Money::from_units(pmt * n as f64);
        assert!((paid - expected).minor().abs() <= n as i64);
    }
}
