//! Range securities, limit-order book, continuous double-auction matching,
//! and sequence settlement.
//!
//! Each security is a binary contract paying 1 ECU if the settlement-year
//! temperature falls in its bin. Orders are one-unit limit orders matched
//! under price-time priority, executing at the resting order's price. The
//! bank endows every trader with one complete set of securities at each
//! sequence start and funds settlement, so between those bank events total
//! cash and per-security holdings are conserved.

use crate::{Error, Result};

/// A partition of the temperature axis into `k` bins: `k-1` ascending edges,
/// with open-ended end bins. A value exactly on an edge belongs to the upper
/// bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SecuritySet {
    edges: Vec<f64>,
}

impl SecuritySet {
    pub fn from_edges(edges: Vec<f64>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidArgument("need at least one bin edge".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidArgument("bin edges must be finite".into()));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "bin edges must be strictly ascending".into(),
            ));
        }
        Ok(Self { edges })
    }

    /// Number of bins.
    pub fn k(&self) -> usize {
        self.edges.len() + 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// The bin containing `x`; boundary ties go to the upper bin.
    pub fn bin_of(&self, x: f64) -> usize {
        self.edges.partition_point(|&e| e <= x)
    }
}

/// Equal-width binning: `k-2` interior bins spanning `[lo, hi]` plus two
/// open-ended end bins. `k = 2` degenerates to a single edge at the midpoint.
pub fn make_binning(k: usize, lo: f64, hi: f64) -> Result<SecuritySet> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need k >= 2 bins, got {k}")));
    }
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "bin range must have lo < hi, got [{lo}, {hi}]"
        )));
    }
    if k == 2 {
        return SecuritySet::from_edges(vec![(lo + hi) / 2.0]);
    }
    let width = (hi - lo) / (k - 2) as f64;
    let edges = (0..k - 1).map(|i| lo + width * i as f64).collect();
    SecuritySet::from_edges(edges)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Buy,
    Sell,
}

/// An order as submitted by a trader; the engine assigns the arrival rank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderSpec {
    pub trader: usize,
    pub security: usize,
    pub limit_price: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Order {
    pub trader: usize,
    pub security: usize,
    pub side: Side,
    pub limit_price: f64,
    pub arrival_rank: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trade {
    pub buyer: usize,
    pub seller: usize,
    pub security: usize,
    pub price: f64,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Limit exceeds cash net of the trader's resting buy commitments.
    InsufficientCash,
    /// No free unit of the security net of resting sell commitments.
    InsufficientHoldings,
    /// The best compatible resting order belongs to the same trader; matching
    /// would self-trade and resting would cross the book, so the order drops.
    SelfCross,
    InvalidPrice,
    InvalidSecurity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub order: OrderSpec,
    pub side: Side,
    pub reason: RejectReason,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct ArrivalOutcome {
    pub trades: Vec<Trade>,
    pub rejections: Vec<Rejection>,
}

/// Per-security resting orders. Both sides are kept unsorted; bests are
/// located by scan (books here hold at most a few hundred orders).
#[derive(Debug, Clone)]
pub struct OrderBook {
    buys: Vec<Vec<Order>>,
    sells: Vec<Vec<Order>>,
}

impl OrderBook {
    fn new(k: usize) -> Self {
        Self {
            buys: vec![Vec::new(); k],
            sells: vec![Vec::new(); k],
        }
    }

    fn best_buy_idx(&self, security: usize) -> Option<usize> {
        best_idx(&self.buys[security], |a, b| {
            a.limit_price > b.limit_price
                || (a.limit_price == b.limit_price && a.arrival_rank < b.arrival_rank)
        })
    }

    fn best_sell_idx(&self, security: usize) -> Option<usize> {
        best_idx(&self.sells[security], |a, b| {
            a.limit_price < b.limit_price
                || (a.limit_price == b.limit_price && a.arrival_rank < b.arrival_rank)
        })
    }

    pub fn best_buy(&self, security: usize) -> Option<&Order> {
        self.best_buy_idx(security).map(|i| &self.buys[security][i])
    }

    pub fn best_sell(&self, security: usize) -> Option<&Order> {
        self.best_sell_idx(security)
            .map(|i| &self.sells[security][i])
    }

    pub fn resting_orders(&self) -> impl Iterator<Item = &Order> {
        self.buys.iter().chain(self.sells.iter()).flatten()
    }

    pub fn len(&self) -> usize {
        self.resting_orders().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Best resting buy strictly below best resting sell for every security.
    pub fn is_uncrossed(&self) -> bool {
        (0..self.buys.len()).all(|s| match (self.best_buy(s), self.best_sell(s)) {
            (Some(b), Some(a)) => b.limit_price < a.limit_price,
            _ => true,
        })
    }

    fn clear(&mut self) {
        for side in self.buys.iter_mut().chain(self.sells.iter_mut()) {
            side.clear();
        }
    }
}

fn best_idx(orders: &[Order], better: impl Fn(&Order, &Order) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, o) in orders.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(j) if better(o, &orders[j]) => best = Some(i),
            _ => {}
        }
    }
    best
}

/// Authoritative cash and holdings balances for all traders.
///
/// The order book acts as the escrow record: a trader's free cash is their
/// balance minus the limits of their resting buys, and a security unit is
/// free only if not committed to a resting sell. This keeps the no-negative
/// invariants exact without duplicated escrow state.
#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    cash: Vec<f64>,
    holdings: Vec<Vec<u32>>,
}

impl Ledger {
    pub fn new(n_traders: usize, k: usize, initial_cash: f64) -> Self {
        Self {
            cash: vec![initial_cash; n_traders],
            holdings: vec![vec![0; k]; n_traders],
        }
    }

    pub fn n_traders(&self) -> usize {
        self.cash.len()
    }

    pub fn cash(&self, trader: usize) -> f64 {
        self.cash[trader]
    }

    pub fn holdings(&self, trader: usize) -> &[u32] {
        &self.holdings[trader]
    }

    pub fn total_cash(&self) -> f64 {
        self.cash.iter().sum()
    }

    pub fn total_units(&self, security: usize) -> u64 {
        self.holdings.iter().map(|h| h[security] as u64).sum()
    }

    /// Bank event: hand every trader one unit of every security (a complete
    /// set, riskless value 1 ECU).
    pub fn endow_complete_sets(&mut self) {
        for h in &mut self.holdings {
            for units in h.iter_mut() {
                *units += 1;
            }
        }
    }
}

/// The matching engine: a security set plus the current period's book.
#[derive(Debug, Clone)]
pub struct Market {
    bins: SecuritySet,
    book: OrderBook,
    next_rank: u64,
}

impl Market {
    pub fn new(bins: SecuritySet) -> Self {
        let k = bins.k();
        Self {
            bins,
            book: OrderBook::new(k),
            next_rank: 0,
        }
    }

    pub fn bins(&self) -> &SecuritySet {
        &self.bins
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    /// Cash not committed to resting buy orders.
    pub fn free_cash(&self, ledger: &Ledger, trader: usize) -> f64 {
        let committed: f64 = self
            .book
            .buys
            .iter()
            .flatten()
            .filter(|o| o.trader == trader)
            .map(|o| o.limit_price)
            .sum();
        ledger.cash(trader) - committed
    }

    /// Units of `security` not committed to resting sell orders.
    pub fn free_units(&self, ledger: &Ledger, trader: usize, security: usize) -> u32 {
        let committed = self.book.sells[security]
            .iter()
            .filter(|o| o.trader == trader)
            .count() as u32;
        ledger.holdings(trader)[security].saturating_sub(committed)
    }

    /// Process one trader arrival: an optional buy and an optional sell, the
    /// buy first. Each order either executes against the best compatible
    /// resting order (at the resting price), rests, or is rejected with a
    /// reason; the ledger is updated atomically per trade.
    pub fn submit_arrival(
        &mut self,
        ledger: &mut Ledger,
        year: i32,
        buy: Option<OrderSpec>,
        sell: Option<OrderSpec>,
    ) -> ArrivalOutcome {
        let mut outcome = ArrivalOutcome::default();
        if let Some(spec) = buy {
            self.process(ledger, year, spec, Side::Buy, &mut outcome);
        }
        if let Some(spec) = sell {
            self.process(ledger, year, spec, Side::Sell, &mut outcome);
        }
        debug_assert!(self.book.is_uncrossed());
        outcome
    }

    fn process(
        &mut self,
        ledger: &mut Ledger,
        year: i32,
        spec: OrderSpec,
        side: Side,
        outcome: &mut ArrivalOutcome,
    ) {
        let mut reject = |reason| {
            outcome.rejections.push(Rejection {
                order: spec,
                side,
                reason,
            })
        };
        if spec.security >= self.bins.k() {
            reject(RejectReason::InvalidSecurity);
            return;
        }
        if !spec.limit_price.is_finite() || !(0.0..=1.0).contains(&spec.limit_price) {
            reject(RejectReason::InvalidPrice);
            return;
        }
        match side {
            Side::Buy => {
                if self.free_cash(ledger, spec.trader) < spec.limit_price {
                    reject(RejectReason::InsufficientCash);
                    return;
                }
                match self.book.best_sell_idx(spec.security) {
                    Some(i) if self.book.sells[spec.security][i].limit_price <= spec.limit_price => {
                        let resting = self.book.sells[spec.security][i];
                        if resting.trader == spec.trader {
                            reject(RejectReason::SelfCross);
                            return;
                        }
                        self.book.sells[spec.security].swap_remove(i);
                        let price = resting.limit_price;
                        ledger.cash[spec.trader] -= price;
                        ledger.holdings[spec.trader][spec.security] += 1;
                        ledger.cash[resting.trader] += price;
                        ledger.holdings[resting.trader][spec.security] -= 1;
                        outcome.trades.push(Trade {
                            buyer: spec.trader,
                            seller: resting.trader,
                            security: spec.security,
                            price,
                            year,
                        });
                    }
                    _ => self.rest(spec, Side::Buy),
                }
            }
            Side::Sell => {
                if self.free_units(ledger, spec.trader, spec.security) < 1 {
                    reject(RejectReason::InsufficientHoldings);
                    return;
                }
                match self.book.best_buy_idx(spec.security) {
                    Some(i) if self.book.buys[spec.security][i].limit_price >= spec.limit_price => {
                        let resting = self.book.buys[spec.security][i];
                        if resting.trader == spec.trader {
                            reject(RejectReason::SelfCross);
                            return;
                        }
                        self.book.buys[spec.security].swap_remove(i);
                        let price = resting.limit_price;
                        ledger.cash[resting.trader] -= price;
                        ledger.holdings[resting.trader][spec.security] += 1;
                        ledger.cash[spec.trader] += price;
                        ledger.holdings[spec.trader][spec.security] -= 1;
                        outcome.trades.push(Trade {
                            buyer: resting.trader,
                            seller: spec.trader,
                            security: spec.security,
                            price,
                            year,
                        });
                    }
                    _ => self.rest(spec, Side::Sell),
                }
            }
        }
    }

    fn rest(&mut self, spec: OrderSpec, side: Side) {
        let order = Order {
            trader: spec.trader,
            security: spec.security,
            side,
            limit_price: spec.limit_price,
            arrival_rank: self.next_rank,
        };
        self.next_rank += 1;
        match side {
            Side::Buy => self.book.buys[spec.security].push(order),
            Side::Sell => self.book.sells[spec.security].push(order),
        }
    }

    /// Remove every outstanding offer; the trading period is concluded.
    /// Clearing moves no value: all escrow implied by resting orders lapses.
    pub fn end_period(&mut self) {
        self.book.clear();
    }
}

/// Settle a sequence: the bin containing `realized_temp` pays 1 ECU per unit
/// held; then every holding of every security expires to zero. Returns the
/// per-trader payout. The book must already be cleared (`end_period`).
pub fn settle_sequence(
    market: &Market,
    ledger: &mut Ledger,
    realized_temp: f64,
) -> Vec<f64> {
    assert!(
        market.book.is_empty(),
        "settlement requires a cleared order book"
    );
    assert!(realized_temp.is_finite());
    let winning = market.bins.bin_of(realized_temp);
    let mut payouts = Vec::with_capacity(ledger.n_traders());
    for t in 0..ledger.n_traders() {
        let pay = ledger.holdings[t][winning] as f64;
        ledger.cash[t] += pay;
        for units in &mut ledger.holdings[t] {
            *units = 0;
        }
        payouts.push(pay);
    }
    payouts
}
