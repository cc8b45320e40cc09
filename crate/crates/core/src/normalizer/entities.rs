//! Entity detection: URLs, emails, mentions, hashtags, percents, money,
//! phone numbers, times, dates and plain numbers map to descriptive tokens.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Url,
    Email,
    Percent,
    Money,
    Phone,
    User,
    Time,
    Date,
    Number,
    Hashtag,
}

impl EntityKind {
    /// The descriptive token emitted for this kind.
    pub fn token(&self) -> &'static str {
        match self {
            EntityKind::Url => "<url>",
            EntityKind::Email => "<email>",
            EntityKind::Percent => "<percent>",
            EntityKind::Money => "<money>",
            EntityKind::Phone => "<phone>",
            EntityKind::User => "<user>",
            EntityKind::Time => "<time>",
            EntityKind::Date => "<date>",
            EntityKind::Number => "<number>",
            EntityKind::Hashtag => "<hashtag>",
        }
    }
}

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:https?://\S+|www\.\S+\.\S+)$").unwrap());
static EMAIL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}$").unwrap());
static USER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^@\w+$").unwrap());
static HASHTAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^#\w+$").unwrap());
static PERCENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+(?:[.,]\d+)?%$").unwrap());
static MONEY: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?:[$€£¥]\d+(?:[.,]\d+)*|\d+(?:[.,]\d+)*[$€£¥])$").unwrap());
static PHONE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\+?\(?\d{1,4}\)?(?:[-.()]\d{1,4}){1,5}$").unwrap());
static TIME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?i)\d{1,2}:\d{2}(?::\d{2})?(?:[ap]m)?$").unwrap());
static DATE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:\d{1,2}[/-]\d{1,2}[/-]\d{2,4}|\d{4}[/-]\d{1,2}[/-]\d{1,2})$").unwrap()
});
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+(?:[.,]\d+)*$").unwrap());

/// First matching kind under the fixed precedence
/// url > email > user > hashtag > percent > money > phone > time > date > number.
pub fn map_entity(token: &str) -> Option<EntityKind> {
    if token.is_empty() {
        return None;
    }
    if URL.is_match(token) {
        Some(EntityKind::Url)
    } else if EMAIL.is_match(token) {
        Some(EntityKind::Email)
    } else if USER.is_match(token) {
        Some(EntityKind::User)
    } else if HASHTAG.is_match(token) {
        Some(EntityKind::Hashtag)
    } else if PERCENT.is_match(token) {
        Some(EntityKind::Percent)
    } else if MONEY.is_match(token) {
        Some(EntityKind::Money)
    } else if PHONE.is_match(token)
        && token.chars().filter(|c| c.is_ascii_digit()).count() >= 7
        && !DATE.is_match(token)
    {
        // date-shaped digit groups such as 2015-10-10 are not phones
        Some(EntityKind::Phone)
    } else if TIME.is_match(token) {
        Some(EntityKind::Time)
    } else if DATE.is_match(token) {
        Some(EntityKind::Date)
    } else if NUMBER.is_match(token) {
        Some(EntityKind::Number)
    } else {
        None
    }
}
