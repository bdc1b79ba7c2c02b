use std::collections::HashMap;
use std::io::Read;
use std::str::FromStr;

use super::types::{Covariates, PanelObservation};
use super::{Dataset, PanelError};

pub const REQUIRED_COLUMNS: [&str; 15] = [
    "sponsorship_id",
    "period",
    "sponsorship_type",
    "big_four_property",
    "gdp_growth",
    "cpi_inflation",
    "sponsor_location",
    "sponsor_category",
    "regional_proximity",
    "congruence",
    "brand_equity",
    "b2b",
    "publicly_traded",
    "clutter",
    "event",
];

const CLUSTER_COLUMN: &str = "cluster_id";

struct Row<'a> {
    record: &'a csv::StringRecord,
    index: &'a HashMap<&'static str, usize>,
    line: usize,
}

impl Row<'_> {
    fn raw(&self, column: &'static str) -> &str {
        self.record.get(self.index[column]).unwrap_or("").trim()
    }

    fn bad_value(&self, column: &'static str) -> PanelError {
        PanelError::BadValue {
            line: self.line,
            column: column.to_string(),
            token: self.raw(column).to_string(),
        }
    }

    fn token<T: FromStr>(&self, column: &'static str) -> Result<T, PanelError> {
        let raw = self.raw(column);
        raw.parse().map_err(|_| PanelError::BadEnumToken {
            line: self.line,
            column: column.to_string(),
            token: raw.to_string(),
        })
    }

    fn number<T: FromStr>(&self, column: &'static str) -> Result<T, PanelError> {
        self.raw(column).parse().map_err(|_| self.bad_value(column))
    }

    fn float_in(&self, column: &'static str, lo: f64, hi: f64) -> Result<f64, PanelError> {
        let value: f64 = self.number(column)?;
        if !value.is_finite() || value < lo || value > hi {
            return Err(PanelError::OutOfRange {
                line: self.line,
                column: column.to_string(),
                value,
            });
        }
        Ok(value)
    }

    fn boolean(&self, column: &'static str) -> Result<bool, PanelError> {
        match self.raw(column) {
            "0" => Ok(false),
            "1" => Ok(true),
            s if s.eq_ignore_ascii_case("false") => Ok(false),
            s if s.eq_ignore_ascii_case("true") => Ok(true),
            _ => Err(self.bad_value(column)),
        }
    }

    fn covariates(&self) -> Result<Covariates, PanelError> {
        let clutter: u32 = self.number("clutter")?;
        if clutter < 1 {
            return Err(PanelError::OutOfRange {
                line: self.line,
                column: "clutter".into(),
                value: clutter as f64,
            });
        }
        let big_four_property = match self.raw("big_four_property") {
            "" => None,
            s if s.eq_ignore_ascii_case("none") => None,
            _ => Some(self.token("big_four_property")?),
        };
        Ok(Covariates {
            sponsorship_type: self.token("sponsorship_type")?,
            big_four_property,
            gdp_growth: self.float_in("gdp_growth", -100.0, 100.0)?,
            cpi_inflation: self.float_in("cpi_inflation", -100.0, 5000.0)?,
            sponsor_location: self.token("sponsor_location")?,
            sponsor_category: self.token("sponsor_category")?,
            regional_proximity: self.boolean("regional_proximity")?,
            congruence: self.boolean("congruence")?,
            brand_equity: self.boolean("brand_equity")?,
            b2b: self.boolean("b2b")?,
            publicly_traded: self.boolean("publicly_traded")?,
            clutter,
        })
    }

    fn observation(&self) -> Result<PanelObservation, PanelError> {
        let sponsorship_id = self.raw("sponsorship_id").to_string();
        if sponsorship_id.is_empty() {
            return Err(self.bad_value("sponsorship_id"));
        }
        let period: u32 = self.number("period")?;
        if period < 1 {
            return Err(PanelError::OutOfRange {
                line: self.line,
                column: "period".into(),
                value: period as f64,
            });
        }
        let cluster_id = match self.index.get(CLUSTER_COLUMN) {
            Some(&i) => match self.record.get(i).map(str::trim) {
                Some(s) if !s.is_empty() => s.to_string(),
                _ => sponsorship_id.clone(),
            },
            None => sponsorship_id.clone(),
        };
        Ok(PanelObservation {
            period,
            covariates: self.covariates()?,
            event: self.boolean("event")?,
            cluster_id,
            sponsorship_id,
        })
    }
}

/// Reads a panel CSV (header + one row per sponsorship-year) and validates it.
pub fn parse_panel_csv<R: Read>(source: R) -> Result<Dataset, PanelError> {
    let observations = read_rows(source, &REQUIRED_COLUMNS, &[CLUSTER_COLUMN], |r| {
        r.observation()
    })?;
    Dataset::new(observations)
}

/// Leading columns of a portfolio file; the covariate columns of the panel
/// format (minus `period` and `event`) follow.
pub const PORTFOLIO_COLUMNS: [&str; 3] = ["sponsorship_id", "current_tenure", "annual_fee"];

/// One current sponsorship in a portfolio file.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioEntry {
    pub sponsorship_id: String,
    pub current_tenure: u32,
    pub annual_fee: f64,
    pub covariates: Covariates,
}

/// Reads `sponsorship_id,current_tenure,annual_fee,<covariate columns>`.
pub fn parse_portfolio_csv<R: Read>(source: R) -> Result<Vec<PortfolioEntry>, PanelError> {
    let required: Vec<&'static str> = PORTFOLIO_COLUMNS
        .iter()
        .chain(
            REQUIRED_COLUMNS
                .iter()
                .filter(|c| !matches!(**c, "sponsorship_id" | "period" | "event")),
        )
        .copied()
        .collect();
    let entries = read_rows(source, &required, &[], |row| {
        let sponsorship_id = row.raw("sponsorship_id").to_string();
        if sponsorship_id.is_empty() {
            return Err(row.bad_value("sponsorship_id"));
        }
        let annual_fee: f64 = row.number("annual_fee")?;
        if !annual_fee.is_finite() || annual_fee < 0.0 {
            return Err(PanelError::OutOfRange {
                line: row.line,
                column: "annual_fee".into(),
                value: annual_fee,
            });
        }
        Ok(PortfolioEntry {
            current_tenure: row.number("current_tenure")?,
            annual_fee,
            covariates: row.covariates()?,
            sponsorship_id,
        })
    });
    match entries {
        Err(PanelError::EmptyInput) => Ok(Vec::new()),
        other => other,
    }
}

fn read_rows<R: Read, T>(
    source: R,
    required: &[&'static str],
    optional: &[&'static str],
    mut parse: impl FnMut(&Row<'_>) -> Result<T, PanelError>,
) -> Result<Vec<T>, PanelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = reader
        .headers()
        .map_err(|e| PanelError::Csv(e.to_string()))?
        .clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(PanelError::EmptyInput);
    }

    let mut index: HashMap<&'static str, usize> = HashMap::new();
    for &name in required.iter().chain(optional) {
        if let Some(pos) = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
        {
            index.insert(name, pos);
        }
    }
    if let Some(missing) = required.iter().find(|c| !index.contains_key(*c)) {
        return Err(PanelError::MissingColumn(missing.to_string()));
    }

    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(PanelError::Csv(e.to_string())),
        }
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let row = Row {
            record: &record,
            index: &index,
            line,
        };
        out.push(parse(&row)?);
    }

    if out.is_empty() {
        return Err(PanelError::EmptyInput);
    }
    Ok(out)
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// Writes a dataset in the same format `parse_panel_csv` reads.
///
/// The optional `cluster_id` column is emitted only when some cluster differs
/// from its sponsorship id. Floats use the shortest exact representation.
pub fn render_panel_csv(dataset: &Dataset) -> String {
    let with_clusters = dataset
        .observations()
        .iter()
        .any(|o| o.cluster_id != o.sponsorship_id);
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    if with_clusters {
        header.push(CLUSTER_COLUMN);
    }
    writer.write_record(&header).expect("in-memory write");
    for o in dataset.observations() {
        let c = &o.covariates;
        let mut fields = vec![
            o.sponsorship_id.clone(),
            o.period.to_string(),
            c.sponsorship_type.to_string(),
            c.big_four_property
                .map(|p| p.to_string())
                .unwrap_or_else(|| "none".into()),
            c.gdp_growth.to_string(),
            c.cpi_inflation.to_string(),
            c.sponsor_location.to_string(),
            c.sponsor_category.to_string(),
            bit(c.regional_proximity).into(),
            bit(c.congruence).into(),
            bit(c.brand_equity).into(),
            bit(c.b2b).into(),
            bit(c.publicly_traded).into(),
            c.clutter.to_string(),
            bit(o.event).into(),
        ];
        if with_clusters {
            fields.push(o.cluster_id.clone());
        }
        writer.write_record(&fields).expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("fields are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::spells_from_panel;

    const HEADER: &str = "sponsorship_id,period,sponsorship_type,big_four_property,gdp_growth,cpi_inflation,sponsor_location,sponsor_category,regional_proximity,congruence,brand_equity,b2b,publicly_traded,clutter,event";

    #[test]
    fn minimal_file() {
        let text = format!(
            "{HEADER}\nA1,1,league,NFL,2.0,6.0,north_america,automotive,0,1,1,0,1,12,0\nA1,2,League,nfl,1.5,5.5,North_America,Automotive,0,1,1,0,1,13,1\n"
        );
        let ds = parse_panel_csv(text.as_bytes()).unwrap();
        let spells = spells_from_panel(&ds);
        assert_eq!(spells.len(), 1);
        assert_eq!(spells[0].duration, 2);
        assert!(spells[0].ended);
    }

    #[test]
    fn portfolio_file() {
        let text = "sponsorship_id,current_tenure,annual_fee,sponsorship_type,big_four_property,gdp_growth,cpi_inflation,sponsor_location,sponsor_category,regional_proximity,congruence,brand_equity,b2b,publicly_traded,clutter\n\
                    P2,3,2250000,league,nfl,2,6,north_america,automotive,0,0,1,0,1,5\n\
                    P1,0,500000,team,none,1.5,2,europe,bank,1,0,0,1,0,2\n";
        let entries = parse_portfolio_csv(text.as_bytes()).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0].sponsorship_id, "P2");
        assert_eq!(entries[0].current_tenure, 3);
        assert_eq!(
            entries[0].covariates.big_four_property,
            Some(crate::panel::BigFourProperty::Nfl)
        );
        assert_eq!(entries[1].annual_fee, 500000.0);

        let header_only = text.lines().next().unwrap();
        assert!(parse_portfolio_csv(header_only.as_bytes())
            .unwrap()
            .is_empty());
        let negative_fee = text.replace("500000", "-1");
        assert!(matches!(
            parse_portfolio_csv(negative_fee.as_bytes()),
            Err(PanelError::OutOfRange { .. })
        ));
    }

    #[test]
    fn event_on_first_of_two_rows() {
        let text = format!(
            "{HEADER}\nA1,1,league,nfl,2.0,6.0,north_america,automotive,0,1,1,0,1,12,1\nA1,2,league,nfl,1.5,5.5,north_america,automotive,0,1,1,0,1,13,0\n"
        );
        assert_eq!(
            parse_panel_csv(text.as_bytes()).unwrap_err(),
            PanelError::EventNotTerminal("A1".into())
        );
    }

    #[test]
    fn header_only_is_empty() {
        assert_eq!(
            parse_panel_csv(format!("{HEADER}\n").as_bytes()).unwrap_err(),
            PanelError::EmptyInput
        );
        assert_eq!(
            parse_panel_csv("".as_bytes()).unwrap_err(),
            PanelError::EmptyInput
        );
    }

    #[test]
    fn missing_column() {
        let header = HEADER.replace(",clutter", "");
        let err = parse_panel_csv(format!("{header}\n").as_bytes()).unwrap_err();
        assert_eq!(err, PanelError::MissingColumn("clutter".into()));
    }

    #[test]
    fn bad_enum_reports_line_and_column() {
        let text = format!("{HEADER}\nA1,1,league,nfl,2.0,6.0,mars,automotive,0,1,1,0,1,12,1\n");
        match parse_panel_csv(text.as_bytes()).unwrap_err() {
            PanelError::BadEnumToken {
                line,
                column,
                token,
            } => {
                assert_eq!(line, 2);
                assert_eq!(column, "sponsor_location");
                assert_eq!(token, "mars");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn range_checks() {
        let text = format!("{HEADER}\nA1,1,league,nfl,2.0,6000,europe,automotive,0,1,1,0,1,12,1\n");
        assert!(matches!(
            parse_panel_csv(text.as_bytes()).unwrap_err(),
            PanelError::OutOfRange { .. }
        ));
        let text = format!("{HEADER}\nA1,1,league,nfl,2.0,6.0,europe,automotive,0,1,1,0,1,0,1\n");
        assert!(matches!(
            parse_panel_csv(text.as_bytes()).unwrap_err(),
            PanelError::OutOfRange { .. }
        ));
        let text = format!("{HEADER}\nA1,1,league,nfl,,6.0,europe,automotive,0,1,1,0,1,3,1\n");
        assert!(matches!(
            parse_panel_csv(text.as_bytes()).unwrap_err(),
            PanelError::BadValue { .. }
        ));
    }

    #[test]
    fn optional_cluster_column() {
        let text = format!(
            "{HEADER},cluster_id\nA,1,team,,2,3,europe,tech,0,0,0,0,0,1,1,club7\nB,1,team,none,2,3,europe,tech,0,0,0,0,0,1,0,\n"
        );
        let ds = parse_panel_csv(text.as_bytes()).unwrap();
        assert_eq!(ds.observations()[0].cluster_id, "club7");
        assert_eq!(ds.observations()[1].cluster_id, "B");
        let again = parse_panel_csv(render_panel_csv(&ds).as_bytes()).unwrap();
        assert_eq!(again, ds);
    }
}
