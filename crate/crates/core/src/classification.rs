//! Band selection, thirds modulation and the compensation recommendation.

use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::CriteriaSchema;
use crate::scoring::{Money, ScoreBreakdown};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Third {
    Lower,
    Middle,
    Upper,
}

impl Third {
    pub fn index(self) -> u32 {
        match self {
            Third::Lower => 0,
            Third::Middle => 1,
            Third::Upper => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Third::Lower => "lower",
            Third::Middle => "middle",
            Third::Upper => "upper",
        }
    }
}

impl fmt::Display for Third {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub band_index: usize,
    pub band_label: String,
    pub score_lo: Decimal,
    /// `None` for the unbounded top band.
    pub score_hi: Option<Decimal>,
    /// Ceiling used for the position: `score_hi`, or the schema's max total
    /// for the unbounded top band.
    pub effective_hi: Decimal,
    pub total: Decimal,
    pub position_fraction: Decimal,
    pub third: Third,
    pub below_scale: bool,
}

/// Interval `(lo, hi]` of baseline multiples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiplierInterval {
    pub lo: Decimal,
    pub hi: Decimal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmountRange {
    pub lo: Money,
    pub hi: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompensationRecommendation {
    pub multiplier_interval: MultiplierInterval,
    pub third_interval: MultiplierInterval,
    pub recommended_multiplier: Decimal,
    pub recommended_amount: Money,
    /// `third_interval` scaled by the baseline.
    pub amount_range: AmountRange,
    pub band_cap_amount: Money,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("case incomplete: missing {}", .missing.join(", "))]
    IncompleteCase { missing: Vec<String> },
    #[error("schema has no classification bands")]
    NoBands,
    #[error("band index {0} out of range for schema")]
    UnknownBand(usize),
    #[error("baseline amount must be positive, got {0}")]
    NonPositiveBaseline(Decimal),
}

/// Classifies a complete breakdown.
pub fn classify(schema: &CriteriaSchema, breakdown: &ScoreBreakdown) -> Result<Classification, ClassifyError> {
    if !breakdown.complete {
        return Err(ClassifyError::IncompleteCase {
            missing: breakdown.missing.clone(),
        });
    }
    classify_total(schema, breakdown.weighted_total)
}

/// Classifies a raw weighted total. Totals under the first band clamp to its
/// start and are flagged `below_scale`; totals beyond the last band's ceiling
/// clamp to position 1.
pub fn classify_total(schema: &CriteriaSchema, total: Decimal) -> Result<Classification, ClassifyError> {
    let first = schema.bands.first().ok_or(ClassifyError::NoBands)?;
    let last_index = schema.bands.len() - 1;

    let (band_index, below_scale) = if total < first.score_lo {
        (0, true)
    } else {
        let idx = schema
            .bands
            .iter()
            .position(|b| b.contains(total))
            .unwrap_or(last_index);
        (idx, false)
    };
    let band = &schema.bands[band_index];
    let effective_hi = band.score_hi.unwrap_or_else(|| schema.max_total());

    let span = effective_hi - band.score_lo;
    let offset = (total - band.score_lo).max(Decimal::ZERO).min(span.max(Decimal::ZERO));
    let (position_fraction, third) = if span <= Decimal::ZERO {
        (Decimal::ZERO, Third::Lower)
    } else {
        let three = Decimal::from(3);
        // compare 3*offset against span instead of the rounded quotient
        let third = if three * offset < span {
            Third::Lower
        } else if three * offset < Decimal::TWO * span {
            Third::Middle
        } else {
            Third::Upper
        };
        (offset / span, third)
    };

    Ok(Classification {
        band_index,
        band_label: band.label.clone(),
        score_lo: band.score_lo,
        score_hi: band.score_hi,
        effective_hi,
        total,
        position_fraction,
        third,
        below_scale,
    })
}

/// Baseline multiples for a band: `(previous cap, this cap]`, floor 0.
pub fn multiplier_interval(schema: &CriteriaSchema, band_index: usize) -> Result<MultiplierInterval, ClassifyError> {
    let band = schema
        .bands
        .get(band_index)
        .ok_or(ClassifyError::UnknownBand(band_index))?;
    let lo = match band_index {
        0 => Decimal::ZERO,
        i => schema.bands[i - 1].multiplier_cap,
    };
    Ok(MultiplierInterval {
        lo,
        hi: band.multiplier_cap,
    })
}

pub fn recommend_compensation(
    schema: &CriteriaSchema,
    classification: &Classification,
    baseline: &Money,
) -> Result<CompensationRecommendation, ClassifyError> {
    if baseline.amount <= Decimal::ZERO {
        return Err(ClassifyError::NonPositiveBaseline(baseline.amount));
    }
    let interval = multiplier_interval(schema, classification.band_index)?;
    let width = interval.hi - interval.lo;
    let k = Decimal::from(classification.third.index());
    let three = Decimal::from(3);
    let six = Decimal::from(6);

    let third_lo = interval.lo + width * k / three;
    let third_hi = if classification.third == Third::Upper {
        interval.hi
    } else {
        interval.lo + width * (k + Decimal::ONE) / three
    };
    let mid_steps = Decimal::TWO * k + Decimal::ONE;
    let recommended_multiplier = interval.lo + width * mid_steps / six;

    // Scale by the baseline before dividing so terminating amounts stay exact.
    let base = baseline.amount;
    let amount_at = |steps: Decimal, denom: Decimal| interval.lo * base + width * base * steps / denom;
    let money = |amount: Decimal| Money::new(amount, baseline.currency.clone());

    Ok(CompensationRecommendation {
        multiplier_interval: interval,
        third_interval: MultiplierInterval {
            lo: third_lo,
            hi: third_hi,
        },
        recommended_multiplier,
        recommended_amount: money(amount_at(mid_steps, six)),
        amount_range: AmountRange {
            lo: money(amount_at(k, three)),
            hi: money(if classification.third == Third::Upper {
                interval.hi * base
            } else {
                amount_at(k + Decimal::ONE, three)
            }),
        },
        band_cap_amount: money(interval.hi * base),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::default_clt_schema;
    use crate::scoring::score_case;
    use crate::testing::{case_with_severities, uniform_case};
    use proptest::prelude::*;
    use rust_decimal_macros::dec;

    fn clt(total: Decimal) -> Classification {
        classify_total(&default_clt_schema(), total).unwrap()
    }

    #[test]
    fn medium_middle() {
        let c = clt(dec!(43.8));
        assert_eq!(c.band_label, "Medium");
        assert_eq!(c.position_fraction, dec!(0.6));
        assert_eq!(c.third, Third::Middle);
        assert!(!c.below_scale);
    }

    #[test]
    fn very_severe_floor() {
        let c = clt(dec!(69.0));
        assert_eq!(c.band_label, "Very Severe");
        assert_eq!(c.effective_hi, dec!(73.0));
        assert_eq!(c.position_fraction, Decimal::ZERO);
        assert_eq!(c.third, Third::Lower);
    }

    #[test]
    fn below_scale_minimum() {
        let c = clt(dec!(14.6));
        assert_eq!(c.band_label, "Mild");
        assert!(c.below_scale);
        assert_eq!(c.position_fraction, Decimal::ZERO);
        assert_eq!(c.third, Third::Lower);
    }

    #[test]
    fn boundary_table() {
        let table = [
            (dec!(32.99), "Mild"),
            (dec!(33), "Medium"),
            (dec!(50.99), "Medium"),
            (dec!(51), "Severe"),
            (dec!(68.99), "Severe"),
            (dec!(69), "Very Severe"),
            (dec!(73), "Very Severe"),
        ];
        for (total, label) in table {
            assert_eq!(clt(total).band_label, label, "total {total}");
        }
    }

    #[test]
    fn above_max_clamps() {
        let c = clt(dec!(80));
        assert_eq!(c.band_label, "Very Severe");
        assert_eq!(c.position_fraction, Decimal::ONE);
        assert_eq!(c.third, Third::Upper);
    }

    #[test]
    fn exact_third_boundaries() {
        // Medium spans 18 points: thirds start at 39 and 45
        assert_eq!(clt(dec!(38.99)).third, Third::Lower);
        assert_eq!(clt(dec!(39)).third, Third::Middle);
        assert_eq!(clt(dec!(44.99)).third, Third::Middle);
        assert_eq!(clt(dec!(45)).third, Third::Upper);
    }

    #[test]
    fn incomplete_is_refused() {
        let s = default_clt_schema();
        let mut case = uniform_case(&s, 3);
        case.assessments.pop();
        let b = score_case(&s, &case).unwrap();
        let err = classify(&s, &b).unwrap_err();
        assert_eq!(err.to_string(), "case incomplete: missing XII");
    }

    fn recommend(total: Decimal, baseline: Decimal) -> CompensationRecommendation {
        let s = default_clt_schema();
        recommend_compensation(&s, &classify_total(&s, total).unwrap(), &Money::new(baseline, "BRL")).unwrap()
    }

    #[test]
    fn medium_middle_recommendation() {
        let r = recommend(dec!(43.8), dec!(3000));
        assert_eq!(r.multiplier_interval, MultiplierInterval { lo: dec!(3), hi: dec!(5) });
        assert_eq!(r.third_interval.lo.round_dp(4), dec!(3.6667));
        assert_eq!(r.third_interval.hi.round_dp(4), dec!(4.3333));
        assert_eq!(r.recommended_multiplier, dec!(4));
        assert_eq!(r.recommended_amount.amount, dec!(12000));
        assert_eq!(r.amount_range.lo.amount, dec!(11000));
        assert_eq!(r.amount_range.hi.amount, dec!(13000));
        assert_eq!(r.band_cap_amount.amount, dec!(15000));
    }

    #[test]
    fn mild_lower_recommendation() {
        let r = recommend(dec!(16), dec!(1000));
        assert_eq!(r.multiplier_interval, MultiplierInterval { lo: dec!(0), hi: dec!(3) });
        assert_eq!(r.third_interval, MultiplierInterval { lo: dec!(0), hi: dec!(1) });
        assert_eq!(r.recommended_multiplier, dec!(0.5));
        assert_eq!(r.recommended_amount.amount, dec!(500));
    }

    #[test]
    fn very_severe_upper_recommendation() {
        let r = recommend(dec!(72.5), dec!(2000));
        assert_eq!(r.multiplier_interval, MultiplierInterval { lo: dec!(20), hi: dec!(50) });
        assert_eq!(r.third_interval, MultiplierInterval { lo: dec!(40), hi: dec!(50) });
        assert_eq!(r.recommended_multiplier, dec!(45));
        assert_eq!(r.recommended_amount.amount, dec!(90000));
        assert_eq!(r.band_cap_amount.amount, dec!(100000));
    }

    #[test]
    fn non_positive_baseline_rejected() {
        let s = default_clt_schema();
        let c = classify_total(&s, dec!(40)).unwrap();
        assert!(matches!(
            recommend_compensation(&s, &c, &Money::new(dec!(0), "BRL")),
            Err(ClassifyError::NonPositiveBaseline(_))
        ));
    }

    // Totals reachable in the CLT schema are multiples of 0.1 in [14.6, 73.0].
    fn tenths() -> impl Strategy<Value = Decimal> {
        (146i64..=730).prop_map(|t| Decimal::new(t, 1))
    }

    proptest! {
        #[test]
        fn totality(total in tenths()) {
            let s = default_clt_schema();
            let c = classify_total(&s, total).unwrap();
            let containing = s.bands.iter().filter(|b| b.contains(total)).count();
            if c.below_scale {
                prop_assert_eq!(containing, 0);
                prop_assert_eq!(c.band_index, 0);
            } else {
                prop_assert_eq!(containing, 1);
                prop_assert!(s.bands[c.band_index].contains(total));
            }
            prop_assert!(c.position_fraction >= Decimal::ZERO && c.position_fraction <= Decimal::ONE);
        }

        #[test]
        fn monotone(a in tenths(), b in tenths()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let s = default_clt_schema();
            let base = Money::new(dec!(2500), "BRL");
            let cl = classify_total(&s, lo).unwrap();
            let ch = classify_total(&s, hi).unwrap();
            prop_assert!(cl.band_index <= ch.band_index);
            if cl.band_index == ch.band_index {
                prop_assert!(cl.third <= ch.third);
            }
            let rl = recommend_compensation(&s, &cl, &base).unwrap();
            let rh = recommend_compensation(&s, &ch, &base).unwrap();
            prop_assert!(rl.recommended_multiplier <= rh.recommended_multiplier);
        }

        #[test]
        fn cap_respected(sev in prop::collection::vec(1u8..=5, 12), base in 1i64..1_000_000) {
            let s = default_clt_schema();
            let b = score_case(&s, &case_with_severities(&s, &sev)).unwrap();
            let c = classify(&s, &b).unwrap();
            let baseline = Money::new(Decimal::new(base, 2), "BRL");
            let r = recommend_compensation(&s, &c, &baseline).unwrap();
            let cap = s.bands[c.band_index].multiplier_cap * baseline.amount;
            prop_assert!(r.recommended_amount.amount <= cap);
            prop_assert!(r.multiplier_interval.lo < r.recommended_multiplier);
            prop_assert!(r.recommended_multiplier <= r.multiplier_interval.hi);
            prop_assert!(r.third_interval.lo < r.recommended_multiplier && r.recommended_multiplier < r.third_interval.hi);
            // exact up to the last representable digit
            let diff = (r.recommended_amount.amount - r.recommended_multiplier * baseline.amount).abs();
            prop_assert!(diff < dec!(0.000000000000000001));
        }
    }
}
