use crate::error::{Error, Result};

/// Bytes moved in one synchronization round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerRecord {
    /// 1-based round index.
    pub round: usize,
    pub upload_bytes: u64,
    pub download_bytes: u64,
}

/// Cumulative communication through some round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LedgerTotals {
    pub upload_bytes: u64,
    pub download_bytes: u64,
}

impl LedgerTotals {
    pub fn combined(&self) -> u64 {
        self.upload_bytes + self.download_bytes
    }
}

/// Per-round record of model bytes uploaded by clients and downloaded from
/// the server.
///
/// Upload through the best round is the headline communication volume;
/// downloads are tracked separately.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommLedger {
    records: Vec<LedgerRecord>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append the next round: `uploaders` clients each send
    /// `bytes_per_client`, and `downloaders` clients each receive it.
    pub fn record_round(&mut self, bytes_per_client: u64, uploaders: u64, downloaders: u64) -> LedgerRecord {
        let rec = LedgerRecord {
            round: self.records.len() + 1,
            upload_bytes: bytes_per_client * uploaders,
            download_bytes: bytes_per_client * downloaders,
        };
        self.records.push(rec);
        rec
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn rounds(&self) -> usize {
        self.records.len()
    }

    /// Sums over rounds `1..=upto_round`; `upto_round = 0` is zero.
    pub fn totals(&self, upto_round: usize) -> Result<LedgerTotals> {
        if upto_round > self.records.len() {
            return Err(Error::input(format!(
                "round {upto_round} is beyond the {} recorded rounds",
                self.records.len()
            )));
        }
        Ok(self.records[..upto_round]
            .iter()
            .fold(LedgerTotals::default(), |acc, r| LedgerTotals {
                upload_bytes: acc.upload_bytes + r.upload_bytes,
                download_bytes: acc.download_bytes + r.download_bytes,
            }))
    }

    pub fn total(&self) -> LedgerTotals {
        self.totals(self.records.len()).expect("full range")
    }
}

/// `(upload, download, combined)` bytes through `upto_round`.
pub fn ledger_totals(ledger: &CommLedger, upto_round: usize) -> Result<(u64, u64, u64)> {
    let t = ledger.totals(upto_round)?;
    Ok((t.upload_bytes, t.download_bytes, t.combined()))
}
