//! Line-delimited operator protocol spoken by the fog's operator port.
//!
//! On connect the server sends the greeting line `ivise-operator v1`. Each
//! request is one line; each reply is one or more lines:
//!
//! | request                               | reply                                                   |
//! |---------------------------------------|---------------------------------------------------------|
//! | `SUBMIT <scope> <query text>`         | `OK <query_id>`, optionally followed by `WARN <code> …`  |
//! | `CANCEL <query_id>`                   | `OK <query_id>`                                          |
//! | `STREAM <query_id>`                   | `OK <query_id>`, then `REPORT <json>`… and `END <state>` |
//! | `OFFLINE <start_ms> <end_ms> <text>`  | `OK <count>`, `REPORT <json>` × count, `END done`        |
//! | `EDGES`                               | `OK <count>`, `EDGE <json>` × count, `END done`          |
//! | `STATS`                               | `OK <count>`, `STAT <name> <value>` × count, `END done`  |
//! | `QUIT`                                | `OK bye`, then the server closes the connection         |
//!
//! `<scope>` is `all` or a comma-separated camera list without spaces;
//! `<start_ms>`/`<end_ms>` are millisecond timestamps or `*` for unbounded.
//! Failures reply `ERR <code> <message>` where `<code>` is one of the
//! [`ErrorCode`] names.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::frame::CameraId;
use crate::query::{MatchReport, QueryError, QueryId, Scope, TimeRange};

pub const OPERATOR_GREETING: &str = "ivise-operator v1";

#[derive(Debug, Clone, PartialEq)]
pub enum Request {
    Submit { scope: Scope, text: String },
    Cancel(QueryId),
    Stream(QueryId),
    Offline { range: TimeRange, text: String },
    Edges,
    Stats,
    Quit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    EmptyQuery,
    UnknownGarment,
    UnknownColor,
    InvalidCount,
    MalformedClause,
    UnknownQuery,
    BadRequest,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 8] = [
        ErrorCode::EmptyQuery,
        ErrorCode::UnknownGarment,
        ErrorCode::UnknownColor,
        ErrorCode::InvalidCount,
        ErrorCode::MalformedClause,
        ErrorCode::UnknownQuery,
        ErrorCode::BadRequest,
        ErrorCode::Internal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::EmptyQuery => "EmptyQuery",
            ErrorCode::UnknownGarment => "UnknownGarment",
            ErrorCode::UnknownColor => "UnknownColor",
            ErrorCode::InvalidCount => "InvalidCount",
            ErrorCode::MalformedClause => "MalformedClause",
            ErrorCode::UnknownQuery => "UnknownQuery",
            ErrorCode::BadRequest => "BadRequest",
            ErrorCode::Internal => "Internal",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

impl From<&QueryError> for ErrorCode {
    fn from(e: &QueryError) -> Self {
        match e {
            QueryError::EmptyQuery => ErrorCode::EmptyQuery,
            QueryError::UnknownGarment(_) => ErrorCode::UnknownGarment,
            QueryError::UnknownColor { .. } => ErrorCode::UnknownColor,
            QueryError::InvalidCount(_) => ErrorCode::InvalidCount,
            QueryError::MalformedClause(_) => ErrorCode::MalformedClause,
        }
    }
}

/// Connection state of one edge as seen by the fog.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeStatus {
    pub camera_id: CameraId,
    pub address: String,
    pub latitude: f64,
    pub longitude: f64,
    pub connected: bool,
    pub last_heartbeat_ms: Option<u64>,
    pub messages_received: u64,
    pub bytes_received: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reply {
    Ok(String),
    Warn { code: String, message: String },
    Err { code: ErrorCode, message: String },
    Report(Box<MatchReport>),
    Edge(EdgeStatus),
    Stat { name: String, value: String },
    End(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct LineError(pub String);

fn bound(token: &str) -> Result<Option<u64>, LineError> {
    if token == "*" {
        return Ok(None);
    }
    token.parse().map(Some).map_err(|_| LineError(format!("bad timestamp `{token}`")))
}

fn query_id(token: &str) -> Result<QueryId, LineError> {
    token.trim().parse().map(QueryId).map_err(|_| LineError(format!("bad query id `{token}`")))
}

impl Request {
    pub fn parse(line: &str) -> Result<Self, LineError> {
        let line = line.trim();
        let (verb, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        match verb.to_ascii_uppercase().as_str() {
            "SUBMIT" => {
                let (scope, text) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                if scope.is_empty() {
                    return Err(LineError("SUBMIT needs a scope".into()));
                }
                Ok(Request::Submit { scope: Scope::parse(scope), text: text.trim().to_string() })
            }
            "CANCEL" => Ok(Request::Cancel(query_id(rest)?)),
            "STREAM" => Ok(Request::Stream(query_id(rest)?)),
            "OFFLINE" => {
                let mut parts = rest.splitn(3, char::is_whitespace);
                let start = bound(parts.next().unwrap_or(""))?;
                let end = bound(parts.next().unwrap_or(""))?;
                let text = parts.next().unwrap_or("").trim().to_string();
                Ok(Request::Offline { range: TimeRange { start_ms: start, end_ms: end }, text })
            }
            "EDGES" if rest.is_empty() => Ok(Request::Edges),
            "STATS" if rest.is_empty() => Ok(Request::Stats),
            "QUIT" if rest.is_empty() => Ok(Request::Quit),
            _ => Err(LineError(format!("unknown request `{line}`"))),
        }
    }

    pub fn render(&self) -> String {
        let b = |v: Option<u64>| v.map_or("*".to_string(), |v| v.to_string());
        match self {
            Request::Submit { scope, text } => format!("SUBMIT {scope} {text}"),
            Request::Cancel(id) => format!("CANCEL {id}"),
            Request::Stream(id) => format!("STREAM {id}"),
            Request::Offline { range, text } => format!("OFFLINE {} {} {text}", b(range.start_ms), b(range.end_ms)),
            Request::Edges => "EDGES".into(),
            Request::Stats => "STATS".into(),
            Request::Quit => "QUIT".into(),
        }
    }
}

impl Reply {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        Reply::Err { code, message: message.into() }
    }

    pub fn parse(line: &str) -> Result<Self, LineError> {
        let line = line.trim_end_matches(['\r', '\n']);
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        let json = |e: serde_json::Error| LineError(format!("bad JSON: {e}"));
        match tag {
            "OK" => Ok(Reply::Ok(rest.to_string())),
            "END" => Ok(Reply::End(rest.to_string())),
            "WARN" => {
                let (code, message) = rest.split_once(' ').unwrap_or((rest, ""));
                Ok(Reply::Warn { code: code.to_string(), message: message.to_string() })
            }
            "ERR" => {
                let (code, message) = rest.split_once(' ').unwrap_or((rest, ""));
                let code = ErrorCode::from_name(code).ok_or_else(|| LineError(format!("unknown error code `{code}`")))?;
                Ok(Reply::Err { code, message: message.to_string() })
            }
            "REPORT" => Ok(Reply::Report(Box::new(serde_json::from_str(rest).map_err(json)?))),
            "EDGE" => Ok(Reply::Edge(serde_json::from_str(rest).map_err(json)?)),
            "STAT" => {
                let (name, value) = rest.split_once(' ').unwrap_or((rest, ""));
                Ok(Reply::Stat { name: name.to_string(), value: value.to_string() })
            }
            _ => Err(LineError(format!("unknown reply `{line}`"))),
        }
    }
}

impl fmt::Display for Reply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let one_line = |s: &str| s.replace(['\r', '\n'], " ");
        match self {
            Reply::Ok(s) => write!(f, "OK {}", one_line(s)),
            Reply::Warn { code, message } => write!(f, "WARN {code} {}", one_line(message)),
            Reply::Err { code, message } => write!(f, "ERR {} {}", code.name(), one_line(message)),
            Reply::Report(r) => write!(f, "REPORT {}", serde_json::to_string(r).map_err(|_| fmt::Error)?),
            Reply::Edge(e) => write!(f, "EDGE {}", serde_json::to_string(e).map_err(|_| fmt::Error)?),
            Reply::Stat { name, value } => write!(f, "STAT {name} {}", one_line(value)),
            Reply::End(s) => write!(f, "END {}", one_line(s)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn requests_round_trip() {
        let reqs = [
            Request::Submit { scope: Scope::All, text: "red hat, blue jeans".into() },
            Request::Submit { scope: Scope::parse("cam1,cam2"), text: "grey T-shirt".into() },
            Request::Cancel(QueryId(4)),
            Request::Stream(QueryId(12)),
            Request::Offline { range: TimeRange::all(), text: "red shirt".into() },
            Request::Offline { range: TimeRange::between(10, 20), text: "2: red shirt".into() },
            Request::Edges,
            Request::Stats,
            Request::Quit,
        ];
        for r in reqs {
            assert_eq!(Request::parse(&r.render()).unwrap(), r);
        }
        assert!(Request::parse("DANCE").is_err());
        assert!(Request::parse("CANCEL x").is_err());
        assert!(Request::parse("OFFLINE a * red shirt").is_err());
        assert_eq!(Request::parse("submit all").unwrap(), Request::Submit { scope: Scope::All, text: String::new() });
    }

    #[test]
    fn replies_round_trip() {
        let replies = [
            Reply::Ok("7".into()),
            Reply::Warn { code: "NoEdgesInScope".into(), message: "no connected edge matches cam9".into() },
            Reply::error(ErrorCode::UnknownGarment, "unknown garment `gizmo`"),
            Reply::Stat { name: "persons_indexed".into(), value: "12".into() },
            Reply::End("cancelled".into()),
            Reply::Edge(EdgeStatus {
                camera_id: "cam1".into(),
                address: "10.0.0.5:7001".into(),
                latitude: 42.1,
                longitude: -75.9,
                connected: true,
                last_heartbeat_ms: Some(5000),
                messages_received: 3,
                bytes_received: 999,
            }),
        ];
        for r in replies {
            assert_eq!(Reply::parse(&r.to_string()).unwrap(), r);
        }
    }

    #[test]
    fn error_codes_follow_query_errors() {
        assert_eq!(ErrorCode::from(&QueryError::UnknownGarment("gizmo".into())), ErrorCode::UnknownGarment);
        for c in ErrorCode::ALL {
            assert_eq!(ErrorCode::from_name(c.name()), Some(c));
        }
    }
}
