//! The request-for-quotation process shipped with the crate, with its
//! default indicator pack.

use crate::indicators::IndicatorSet;
use crate::model::ProcessModel;

pub const RFQ_MODEL_JSON: &str = include_str!("../../../models/rfq.json");
pub const RFQ_INDICATORS_JSON: &str = include_str!("../../../indicators/rfq_default.json");

pub const REGISTRATION: &str = "registration of the request for Quotation";
pub const ANALYSIS: &str = "analysis of the request for quotation";
pub const CUSTOMER_DECISION: &str = "customer decision";
pub const PM_AFFECTATION: &str = "a project manager affectation";
pub const REALIZATION: &str = "Realization of the offer";
pub const VALIDATION: &str = "Validation of the offer";
pub const SENDING: &str = "Sending to customer the offer";

/// The seven activities in process order.
pub const ACTIVITIES: [&str; 7] =
    [REGISTRATION, ANALYSIS, PM_AFFECTATION, REALIZATION, VALIDATION, SENDING, CUSTOMER_DECISION];

pub fn rfq_model() -> ProcessModel {
    ProcessModel::from_json(RFQ_MODEL_JSON).expect("shipped model parses")
}

pub fn rfq_indicators() -> IndicatorSet {
    IndicatorSet::from_json(RFQ_INDICATORS_JSON).expect("shipped indicator pack is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_process_model;

    #[test]
    fn shipped_model_is_valid_and_complete() {
        let model = rfq_model();
        assert!(validate_process_model(&model).is_empty());
        for name in ACTIVITIES {
            assert!(model.activity(name).is_some(), "{name}");
        }
        assert_eq!(model.activities.len(), ACTIVITIES.len());
        assert!(!rfq_indicators().is_empty());
    }
}
