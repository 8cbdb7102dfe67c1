//! Client for version-2 randomness beacon pulses, with offline playback.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::SourceError;
use crate::bitio::{decode, BitString, StreamFormat};

/// `outputValue` is a 512-bit value written as hex.
pub const OUTPUT_VALUE_HEX_CHARS: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BeaconPulse {
    pub pulse_index: u64,
    pub output_value: BitString,
    pub timestamp: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PulseFields {
    pulse_index: u64,
    output_value: String,
    time_stamp: String,
}

fn pulse_from_value(v: &Value) -> Result<BeaconPulse, SourceError> {
    // documents arrive either as {"pulse": {...}} or as the bare pulse object
    let body = v.get("pulse").unwrap_or(v);
    let fields: PulseFields =
        serde_json::from_value(body.clone()).map_err(|e| SourceError::MalformedPulse(e.to_string()))?;
    let hex = fields.output_value.trim();
    if hex.len() != OUTPUT_VALUE_HEX_CHARS {
        return Err(SourceError::MalformedPulse(format!(
            "outputValue has {} hex characters, expected {OUTPUT_VALUE_HEX_CHARS}",
            hex.len()
        )));
    }
    let output_value =
        decode(hex.as_bytes(), StreamFormat::Hex, None).map_err(|e| SourceError::MalformedPulse(e.to_string()))?;
    Ok(BeaconPulse {
        pulse_index: fields.pulse_index,
        output_value,
        timestamp: fields.time_stamp,
    })
}

/// Parses one pulse document.
pub fn parse_pulse(doc: &str) -> Result<BeaconPulse, SourceError> {
    let v: Value = serde_json::from_str(doc).map_err(|e| SourceError::MalformedPulse(e.to_string()))?;
    pulse_from_value(&v)
}

pub trait PulseSource {
    /// The pulse with `index`, or the latest one when `index` is `None`.
    fn fetch(&mut self, index: Option<u64>) -> Result<BeaconPulse, SourceError>;
}

/// Live source: `GET <endpoint>/pulse/last` and `GET <endpoint>/pulse/<index>`.
pub struct HttpPulseSource {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl HttpPulseSource {
    pub fn new(endpoint: &str) -> Result<Self, SourceError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| SourceError::Http(e.to_string()))?;
        Ok(Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            client,
        })
    }

    pub fn pulse_url(&self, index: Option<u64>) -> String {
        match index {
            None => format!("{}/pulse/last", self.endpoint),
            Some(i) => format!("{}/pulse/{i}", self.endpoint),
        }
    }
}

impl PulseSource for HttpPulseSource {
    fn fetch(&mut self, index: Option<u64>) -> Result<BeaconPulse, SourceError> {
        let resp = self
            .client
            .get(self.pulse_url(index))
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| SourceError::Http(e.to_string()))?;
        let text = resp.text().map_err(|e| SourceError::Http(e.to_string()))?;
        parse_pulse(&text)
    }
}

/// Plays back pulses recorded in a JSON array of pulse documents.
#[derive(Debug, Clone)]
pub struct FixturePulseSource {
    pulses: Vec<BeaconPulse>,
}

impl FixturePulseSource {
    pub fn from_json(text: &str) -> Result<Self, SourceError> {
        let v: Value = serde_json::from_str(text).map_err(|e| SourceError::MalformedPulse(e.to_string()))?;
        let docs = v
            .as_array()
            .ok_or_else(|| SourceError::MalformedPulse("fixture must be a JSON array".into()))?;
        let pulses = docs.iter().map(pulse_from_value).collect::<Result<Vec<_>, _>>()?;
        if pulses.is_empty() {
            return Err(SourceError::MalformedPulse("fixture holds no pulses".into()));
        }
        Ok(Self { pulses })
    }

    pub fn from_file(path: &Path) -> Result<Self, SourceError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }
}

impl PulseSource for FixturePulseSource {
    fn fetch(&mut self, index: Option<u64>) -> Result<BeaconPulse, SourceError> {
        let found = match index {
            None => self.pulses.iter().max_by_key(|p| p.pulse_index),
            Some(i) => self.pulses.iter().find(|p| p.pulse_index == i),
        };
        found.cloned().ok_or(SourceError::MissingPulse(index.unwrap_or(0)))
    }
}

/// Seed material assembled from consecutive pulses.
#[derive(Debug, Clone, Serialize)]
pub struct BeaconSeed {
    #[serde(skip)]
    pub bits: BitString,
    /// Pulse indices in the order their output values were concatenated.
    pub pulse_indices: Vec<u64>,
}

/// Concatenates the latest pulse and its predecessors until `n_bits` are
/// available, then truncates to exactly `n_bits`.
pub fn beacon_seed(source: &mut dyn PulseSource, n_bits: usize) -> Result<BeaconSeed, SourceError> {
    if n_bits == 0 {
        return Err(SourceError::ZeroLength);
    }
    let mut bits = BitString::with_capacity(n_bits + 512);
    let mut pulse_indices = Vec::new();
    let mut pulse = source.fetch(None)?;
    loop {
        bits.extend_bits(&pulse.output_value);
        pulse_indices.push(pulse.pulse_index);
        if bits.len() >= n_bits {
            break;
        }
        let prev = pulse.pulse_index.checked_sub(1).ok_or(SourceError::MissingPulse(0))?;
        pulse = source.fetch(Some(prev))?;
    }
    bits.truncate(n_bits);
    Ok(BeaconSeed { bits, pulse_indices })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(index: u64, hex: &str) -> String {
        format!(
            r#"{{"pulse":{{"uri":"fixture","version":"Version 2.0","pulseIndex":{index},"timeStamp":"2024-01-01T00:{:02}:00.000Z","outputValue":"{hex}"}}}}"#,
            index % 60
        )
    }

    fn fixture(count: u64) -> FixturePulseSource {
        let docs: Vec<String> = (0..count)
            .map(|i| {
                let nibble = format!("{:X}", i % 16);
                doc(1000 + i, &nibble.repeat(OUTPUT_VALUE_HEX_CHARS))
            })
            .collect();
        FixturePulseSource::from_json(&format!("[{}]", docs.join(","))).unwrap()
    }

    #[test]
    fn parses_a_pulse() {
        let hex = format!("AB{}", "0".repeat(126));
        let p = parse_pulse(&doc(7, &hex)).unwrap();
        assert_eq!(p.pulse_index, 7);
        assert_eq!(p.output_value.len(), 512);
        assert_eq!(p.output_value.slice(0, 8).to_ascii01(), "10101011");
        assert!(p.timestamp.starts_with("2024"));
    }

    #[test]
    fn rejects_short_output_value() {
        let err = parse_pulse(&doc(7, &"A".repeat(100))).unwrap_err();
        assert!(matches!(err, SourceError::MalformedPulse(_)));
        assert!(matches!(
            parse_pulse("{\"pulse\":{}}"),
            Err(SourceError::MalformedPulse(_))
        ));
        assert!(matches!(parse_pulse("not json"), Err(SourceError::MalformedPulse(_))));
    }

    #[test]
    fn seed_of_10007_bits_uses_20_pulses() {
        let mut src = fixture(25);
        let seed = beacon_seed(&mut src, 10007).unwrap();
        assert_eq!(seed.bits.len(), 10007);
        assert_eq!(seed.pulse_indices.len(), 20);
        assert_eq!(seed.pulse_indices[0], 1024);
        assert_eq!(seed.pulse_indices[19], 1005);
        // pulse 1024 repeats nibble 8 (one set bit), pulse 1023 nibble 7 (three)
        assert_eq!(seed.bits.slice(0, 512).count_ones(), 128);
        assert_eq!(seed.bits.slice(512, 1024).count_ones(), 384);
    }

    #[test]
    fn runs_out_of_pulses() {
        let mut src = fixture(3);
        assert!(matches!(
            beacon_seed(&mut src, 2000),
            Err(SourceError::MissingPulse(999))
        ));
    }

    #[test]
    fn url_layout() {
        let src = HttpPulseSource::new("https://beacon.example/beacon/2.0/").unwrap();
        assert_eq!(src.pulse_url(None), "https://beacon.example/beacon/2.0/pulse/last");
        assert_eq!(src.pulse_url(Some(42)), "https://beacon.example/beacon/2.0/pulse/42");
    }
}
