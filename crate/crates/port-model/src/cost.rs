//! Settlement arithmetic: ex-ante cost of the bid plus asymmetric penalties
//! on deviations between realized consumption and the bid.

use crate::types::ImbalancePrices;

/// cost = pi' bid + rho+ * pi' max(consumption - bid, 0)
///               - rho- * pi' max(bid - consumption, 0)
pub fn evaluate_cost(im: &ImbalancePrices, bid: &[f64], consumption: &[f64], prices: &[f64]) -> f64 {
    assert_eq!(bid.len(), consumption.len());
    assert_eq!(bid.len(), prices.len());
    let mut total = 0.0;
    for t in 0..bid.len() {
        let dev = consumption[t] - bid[t];
        total += prices[t] * bid[t];
        if dev > 0.0 {
            total += im.rho_pos * prices[t] * dev;
        } else {
            total -= im.rho_neg * prices[t] * (-dev);
        }
    }
    total
}

/// Positive/negative parts of the deviation, as used by the split rows.
pub fn deviation_split(bid: &[f64], consumption: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pos = bid.iter().zip(consumption).map(|(b, c)| (c - b).max(0.0)).collect();
    let neg = bid.iter().zip(consumption).map(|(b, c)| (b - c).max(0.0)).collect();
    (pos, neg)
}
