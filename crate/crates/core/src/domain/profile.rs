use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Biological sex, used only by the BMR equation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityLevel {
    Sedentary,
    Light,
    Moderate,
    Active,
    VeryActive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diet {
    Omnivore,
    Pescatarian,
    Vegetarian,
    Vegan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthGoal {
    WeightLoss,
    Maintenance,
    MuscleGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MealSlot {
    Breakfast,
    Lunch,
    Dinner,
    Snack,
}

/// Lowercase wire names shared by serde, label encoding and the CLI.
pub trait Token: Sized + Copy + 'static {
    const ALL: &'static [Self];
    fn token(self) -> &'static str;

    fn from_token(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|v| v.token() == s)
    }

    fn tokens() -> Vec<&'static str> {
        Self::ALL.iter().map(|v| v.token()).collect()
    }
}

macro_rules! tokens {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl Token for $ty {
            const ALL: &'static [Self] = &[$(<$ty>::$variant),+];
            fn token(self) -> &'static str {
                match self {
                    $(<$ty>::$variant => $name),+
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl std::str::FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$ty as Token>::from_token(&s.trim().to_lowercase()).ok_or_else(|| {
                    format!("unknown value '{}', expected one of: {}", s, <$ty>::tokens().join(", "))
                })
            }
        }
    };
}

tokens!(Sex { Female => "female", Male => "male" });
tokens!(ActivityLevel {
    Sedentary => "sedentary",
    Light => "light",
    Moderate => "moderate",
    Active => "active",
    VeryActive => "very_active",
});
tokens!(Diet {
    Omnivore => "omnivore",
    Pescatarian => "pescatarian",
    Vegetarian => "vegetarian",
    Vegan => "vegan",
});
tokens!(HealthGoal {
    WeightLoss => "weight_loss",
    Maintenance => "maintenance",
    MuscleGain => "muscle_gain",
});
tokens!(MealSlot {
    Breakfast => "breakfast",
    Lunch => "lunch",
    Dinner => "dinner",
    Snack => "snack",
});

/// A lay user's demographic, dietary and preference attributes.
///
/// Token sets are kept as `Vec<String>` on the wire so that un-normalized input
/// survives deserialization; [`validate_profile`] turns them into sorted,
/// deduplicated lowercase sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    #[serde(default)]
    pub id: String,
    pub age: i64,
    pub sex: Sex,
    pub height_cm: f64,
    pub weight_kg: f64,
    pub activity_level: ActivityLevel,
    pub diet: Diet,
    pub health_goal: HealthGoal,
    #[serde(default)]
    pub allergens: Vec<String>,
    #[serde(default)]
    pub dislikes: Vec<String>,
    pub meal_slot: MealSlot,
}

impl UserProfile {
    pub fn has_allergen(&self, token: &str) -> bool {
        self.allergens.iter().any(|a| a == token)
    }

    pub fn has_dislike(&self, token: &str) -> bool {
        self.dislikes.iter().any(|d| d == token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
}

/// Every invariant a profile violated, one entry per offending field.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.issues.push(ValidationIssue { field: field.to_string(), message: message.into() });
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.issues.iter().any(|i| i.message.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.issues.iter().map(|i| format!("{}: {}", i.field, i.message)).collect();
        f.write_str(&parts.join("; "))
    }
}

impl std::error::Error for ValidationReport {}

/// Lowercase, trim and deduplicate a token list. Empty tokens are dropped.
pub fn normalize_tokens<I, S>(tokens: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    tokens
        .into_iter()
        .map(|t| t.as_ref().trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

/// Check every profile invariant and return the normalized profile, or a report
/// listing each violated field once.
pub fn validate_profile(raw: &UserProfile) -> Result<UserProfile, ValidationReport> {
    let mut report = ValidationReport::default();

    if !(13..=120).contains(&raw.age) {
        report.push("age", format!("age out of range: {} not in [13, 120]", raw.age));
    }
    if !(raw.height_cm > 50.0 && raw.height_cm <= 272.0) {
        report.push("height_cm", format!("height out of range: {} not in (50, 272]", raw.height_cm));
    }
    if !(raw.weight_kg > 20.0 && raw.weight_kg <= 400.0) {
        report.push("weight_kg", format!("weight out of range: {} not in (20, 400]", raw.weight_kg));
    }
    for (field, tokens) in [("allergens", &raw.allergens), ("dislikes", &raw.dislikes)] {
        if tokens.iter().any(|t| t.trim().contains(char::is_whitespace)) {
            report.push(field, "tokens must be single keywords");
        }
    }

    if !report.is_empty() {
        return Err(report);
    }

    Ok(UserProfile {
        id: raw.id.trim().to_string(),
        allergens: normalize_tokens(&raw.allergens),
        dislikes: normalize_tokens(&raw.dislikes),
        ..raw.clone()
    })
}

#[cfg(test)]
pub(crate) fn emna() -> UserProfile {
    UserProfile {
        id: "emna".into(),
        age: 30,
        sex: Sex::Female,
        height_cm: 170.0,
        weight_kg: 65.0,
        activity_level: ActivityLevel::Sedentary,
        diet: Diet::Vegetarian,
        health_goal: HealthGoal::Maintenance,
        allergens: vec![],
        dislikes: vec!["mushroom".into()],
        meal_slot: MealSlot::Dinner,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emna_is_valid() {
        let p = validate_profile(&emna()).unwrap();
        assert_eq!(p.diet, Diet::Vegetarian);
        assert_eq!(p.dislikes, vec!["mushroom"]);
        assert!(p.allergens.is_empty());
    }

    #[test]
    fn age_five_is_reported() {
        let mut p = emna();
        p.age = 5;
        let report = validate_profile(&p).unwrap_err();
        assert_eq!(report.issues.len(), 1);
        assert!(report.mentions("age out of range"));
    }

    #[test]
    fn dislikes_are_normalized() {
        let mut p = emna();
        p.dislikes = vec!["Mushroom ".into(), "mushroom".into()];
        let p = validate_profile(&p).unwrap();
        assert_eq!(p.dislikes, vec!["mushroom"]);
        // idempotent
        assert_eq!(validate_profile(&p).unwrap(), p);
    }

    #[test]
    fn one_entry_per_invalid_field() {
        let mut p = emna();
        p.age = 200;
        p.height_cm = 10.0;
        p.weight_kg = 0.0;
        p.dislikes = vec!["green pepper".into(), "red onion".into()];
        let report = validate_profile(&p).unwrap_err();
        let fields: Vec<_> = report.issues.iter().map(|i| i.field.as_str()).collect();
        assert_eq!(fields, ["age", "height_cm", "weight_kg", "dislikes"]);
    }

    #[test]
    fn nan_height_is_rejected() {
        let mut p = emna();
        p.height_cm = f64::NAN;
        assert!(validate_profile(&p).unwrap_err().mentions("height"));
    }

    #[test]
    fn wire_names_are_snake_case() {
        let json = serde_json::to_value(emna()).unwrap();
        assert_eq!(json["diet"], "vegetarian");
        assert_eq!(json["meal_slot"], "dinner");
        assert_eq!("very_active".parse::<ActivityLevel>().unwrap(), ActivityLevel::VeryActive);
        assert!("keto".parse::<Diet>().is_err());
    }
}
