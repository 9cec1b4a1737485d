//! Historical stock-assessment ingestion and quota recommendation. The input
//! is a `year,biomass,catch` CSV in assessment units together with a carrying
//! capacity estimate; biomass is normalized by that estimate before being
//! shown to a policy, and the policy's quota is scaled back to assessment
//! units. No dynamics are simulated: each year is an independent query.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ecorl_core::decision::Policy;
use ecorl_core::space::BoxSpace;

use crate::output::csv_row;
use crate::CliError;

pub const STOCK_HEADER: [&str; 3] = ["year", "biomass", "catch"];

#[derive(Debug, Clone, PartialEq)]
pub struct StockRow {
    pub year: i64,
    /// Assessment units, e.g. tonnes.
    pub biomass: f64,
    pub catch: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StockSeries {
    rows: Vec<StockRow>,
    k_estimate: f64,
}

impl StockSeries {
    pub fn from_csv_path(path: &Path, k_estimate: f64) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read stock series {}: {e}", path.display()))
        })?;
        Self::from_csv_text(&text, k_estimate)
    }

    /// Parses and validates the series. Errors name the offending data row,
    /// counting from 1 below the header.
    pub fn from_csv_text(text: &str, k_estimate: f64) -> Result<Self, CliError> {
        if !(k_estimate.is_finite() && k_estimate > 0.0) {
            return Err(CliError::validation(format!(
                "K estimate must be positive and finite, got {k_estimate}"
            )));
        }
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| CliError::validation(format!("stock series header: {e}")))?;
        if *header != csv::StringRecord::from(STOCK_HEADER.as_slice()) {
            return Err(CliError::validation(format!(
                "stock series must start with the header {}, got {:?}",
                STOCK_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows: Vec<StockRow> = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let row_no = i + 1;
            let record =
                record.map_err(|e| CliError::validation(format!("row {row_no}: {e}")))?;
            if record.len() != 3 {
                return Err(CliError::validation(format!(
                    "row {row_no}: expected 3 columns, got {}",
                    record.len()
                )));
            }
            let year: i64 = record[0].parse().map_err(|_| {
                CliError::validation(format!("row {row_no}: year {:?} is not an integer", &record[0]))
            })?;
            let biomass = parse_non_negative(&record[1], "biomass", row_no)?;
            let catch = parse_non_negative(&record[2], "catch", row_no)?;
            if let Some(last) = rows.last() {
                if year <= last.year {
                    return Err(CliError::validation(format!(
                        "row {row_no}: year {year} does not increase over {}",
                        last.year
                    )));
                }
            }
            rows.push(StockRow { year, biomass, catch });
        }
        if rows.is_empty() {
            return Err(CliError::validation("stock series has no data rows"));
        }
        Ok(StockSeries { rows, k_estimate })
    }

    pub fn rows(&self) -> &[StockRow] {
        &self.rows
    }

    pub fn k_estimate(&self) -> f64 {
        self.k_estimate
    }

    /// Biomass of row `i` in model units (fraction of the K estimate).
    pub fn normalized_biomass(&self, i: usize) -> f64 {
        self.rows[i].biomass / self.k_estimate
    }

    pub fn to_csv_text(&self) -> String {
        let mut text = String::from("year,biomass,catch\n");
        for row in &self.rows {
            let _ = write!(text, "{},{},{}\n", row.year, row.biomass, row.catch);
        }
        text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub year: i64,
    pub biomass: f64,
    pub historical_catch: f64,
    /// Assessment units, same scale as `biomass`.
    pub recommended_quota: f64,
}

/// Queries `policy` once per year. Normalized biomass outside the
/// environment's observation box is clipped, with a warning per offending
/// year returned alongside the recommendations.
pub fn recommend_quotas<P: Policy + ?Sized>(
    policy: &P,
    series: &StockSeries,
    obs_space: &BoxSpace,
    act_space: &BoxSpace,
) -> (Vec<Recommendation>, Vec<String>) {
    assert_eq!(obs_space.dim(), 1, "stock recommendation needs a scalar observation");
    let mut warnings = Vec::new();
    let mut recommendations = Vec::with_capacity(series.rows().len());
    for (i, row) in series.rows().iter().enumerate() {
        let normalized = series.normalized_biomass(i);
        let mut obs = vec![normalized];
        obs_space.clip_in_place(&mut obs).expect("scalar observation matches the box");
        if obs[0] != normalized {
            warnings.push(format!(
                "year {}: normalized biomass {normalized} is outside [{}, {}], clipped to {}",
                row.year,
                obs_space.low()[0],
                obs_space.high()[0],
                obs[0]
            ));
        }
        let mut action = policy.action(&obs);
        act_space.clip_in_place(&mut action).expect("policy output matches the action box");
        recommendations.push(Recommendation {
            year: row.year,
            biomass: row.biomass,
            historical_catch: row.catch,
            recommended_quota: action[0] * series.k_estimate(),
        });
    }
    (recommendations, warnings)
}

pub fn recommendations_csv(recommendations: &[Recommendation]) -> String {
    let mut text = String::from("year,biomass,historical_catch,recommended_quota\n");
    for r in recommendations {
        text.push_str(&csv_row(&[
            r.year.to_string(),
            r.biomass.to_string(),
            r.historical_catch.to_string(),
            r.recommended_quota.to_string(),
        ]));
    }
    text
}

fn parse_non_negative(raw: &str, what: &str, row_no: usize) -> Result<f64, CliError> {
    let value: f64 = raw.parse().map_err(|_| {
        CliError::validation(format!("row {row_no}: {what} {raw:?} is not a number"))
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(CliError::validation(format!(
            "row {row_no}: {what} must be non-negative, got {value}"
        )));
    }
    Ok(value)
}
