use super::{Analysis, Application, Decision};
use crate::digest::sha256_hex;
use crate::verifier::ConfigRecord;

/// Digest identifying one evidence row; independent of CSV quoting.
pub fn row_digest(row: &[String]) -> String {
    format!("sha256:{}", sha256_hex(row.join("\t").as_bytes()))
}

/// Tabular evidence for one analysis: a row per verified configuration and,
/// for failsafe decisions, a final row for the failsafe configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

const FAILSAFE: &str = "failsafe";

impl EvidenceTable {
    pub fn build<A: Application>(app: &A, analysis: &Analysis<A::Config>) -> Self {
        let names = app.property_names();
        let fields = app.configurations().first().map(|c| c.field_names()).unwrap_or_default();
        let mut header = vec!["config".to_string()];
        header.extend(fields.iter().cloned());
        header.extend(names.iter().cloned());
        header.extend(["cost", "feasible", "note"].map(String::from));
        let mut rows = Vec::new();
        for (i, e) in analysis.outcome.entries.iter().enumerate() {
            let mut row = vec![e.config.to_string()];
            row.extend(e.config.field_values());
            for j in 0..names.len() {
                row.push(e.value(j).map(|v| v.to_string()).unwrap_or_default());
            }
            row.push(analysis.costs.get(i).copied().flatten().map(|c| c.to_string()).unwrap_or_default());
            row.push(e.feasible().to_string());
            row.push(e.results.as_ref().err().map(|x| x.to_string()).unwrap_or_default());
            rows.push(row);
        }
        if let Decision::Failsafe { target, reason } = &analysis.decision {
            let mut row = vec![target.to_string()];
            row.extend(target.field_values());
            row.extend(std::iter::repeat_n(String::new(), names.len() + 1));
            row.push(FAILSAFE.into());
            row.push(reason.to_string());
            rows.push(row);
        }
        EvidenceTable { header, rows }
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn find(&self, config: &str, feasible: &str) -> Option<&Vec<String>> {
        let f = self.column("feasible")?;
        self.rows.iter().find(|r| r[0] == config && r[f] == feasible)
    }

    /// Digest of the feasible row for `config`.
    pub fn digest_of(&self, config: &str) -> Option<String> {
        self.find(config, "true").map(|r| row_digest(r))
    }

    pub fn failsafe_digest(&self) -> Option<String> {
        let f = self.column("feasible")?;
        self.rows.iter().find(|r| r[f] == FAILSAFE).map(|r| row_digest(r))
    }

    /// Row whose digest is `digest`.
    pub fn resolve(&self, digest: &str) -> Option<&Vec<String>> {
        self.rows.iter().find(|r| row_digest(r) == digest)
    }

    pub fn feasible_rows(&self) -> usize {
        let Some(f) = self.column("feasible") else { return 0 };
        self.rows.iter().filter(|r| r[f] == "true").count()
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(String::from).collect();
        let rows =
            r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<Result<Vec<Vec<String>>, _>>()?;
        Ok(EvidenceTable { header, rows })
    }
}
