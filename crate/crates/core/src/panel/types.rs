use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Declares a closed set of snake_case tokens with a display label for reports.
macro_rules! token_enum {
    (
        $(#[$meta:meta])*
        $name:ident { $($variant:ident => ($token:literal, $label:literal)),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn token(self) -> &'static str {
                match self {
                    $($name::$variant => $token),+
                }
            }

            /// Human-readable label used in report tables.
            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.token())
            }
        }

        impl FromStr for $name {
            type Err = UnknownToken;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                let needle = s.trim();
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.token().eq_ignore_ascii_case(needle))
                    .ok_or_else(|| UnknownToken(needle.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.token())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(deserializer)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownToken(pub String);

impl fmt::Display for UnknownToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown token {:?}", self.0)
    }
}

impl std::error::Error for UnknownToken {}

token_enum! {
    SponsorshipType {
        NamingRights => ("naming_rights", "Naming Rights"),
        EventTitle => ("event_title", "Event Title"),
        League => ("league", "League"),
        JerseyShirt => ("jersey_shirt", "Jersey/Shirt"),
        Team => ("team", "Team"),
        Olympic => ("olympic", "Olympic Games"),
        WorldCup => ("world_cup", "World Cup"),
    }
}

token_enum! {
    /// "Big Four" North American leagues, treated as high-demand property flags.
    BigFourProperty {
        Mlb => ("mlb", "MLB"),
        Nba => ("nba", "NBA"),
        Nhl => ("nhl", "NHL"),
        Nfl => ("nfl", "NFL"),
    }
}

token_enum! {
    SponsorLocation {
        Africa => ("africa", "Africa"),
        Asia => ("asia", "Asia"),
        Australia => ("australia", "Australia"),
        Europe => ("europe", "Europe"),
        NorthAmerica => ("north_america", "North America"),
        SouthAmerica => ("south_america", "South America"),
    }
}

token_enum! {
    SponsorCategory {
        AlcoholicBeverage => ("alcoholic_beverage", "Alcoholic Beverage"),
        NonAlcoholicBeverage => ("non_alcoholic_beverage", "Non-Alcoholic Beverage"),
        Automotive => ("automotive", "Automotive"),
        Insurance => ("insurance", "Insurance"),
        Apparel => ("apparel", "Apparel"),
        Retail => ("retail", "Retail"),
        Tech => ("tech", "Tech"),
        Qsr => ("qsr", "QSR"),
        Food => ("food", "Food"),
        Media => ("media", "Media"),
        Bank => ("bank", "Bank"),
        CreditCard => ("credit_card", "Credit Card"),
        FinancialServices => ("financial_services", "Financial Services"),
        MedicalHospitals => ("medical_hospitals", "Medical/Hospitals"),
        Pharmaceutical => ("pharmaceutical", "Pharmaceutical"),
        PersonalCare => ("personal_care", "Personal Care"),
        Airline => ("airline", "Airline"),
        ShippingMail => ("shipping_mail", "Shipping/Mail"),
        UtilitiesPower => ("utilities_power", "Utilities/Power"),
        Hotel => ("hotel", "Hotel"),
        Betting => ("betting", "Betting"),
        Tire => ("tire", "Tire"),
        Telecom => ("telecom", "Telecom"),
        Other => ("other", "Other"),
    }
}

token_enum! {
    /// Binary sponsor characteristics.
    Flag {
        RegionalProximity => ("regional_proximity", "Regional Proximity"),
        Congruence => ("congruence", "Congruence"),
        BrandEquity => ("brand_equity", "Brand Equity"),
        B2b => ("b2b", "B2B"),
        PubliclyTraded => ("publicly_traded", "Publicly-Traded"),
    }
}

/// Everything about a sponsorship-year that can enter the model.
///
/// `gdp_growth`, `cpi_inflation` and `clutter` may vary from year to year;
/// the rest are fixed for a sponsorship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Covariates {
    pub sponsorship_type: SponsorshipType,
    #[serde(default, with = "optional_property")]
    pub big_four_property: Option<BigFourProperty>,
    pub gdp_growth: f64,
    pub cpi_inflation: f64,
    pub sponsor_location: SponsorLocation,
    pub sponsor_category: SponsorCategory,
    pub regional_proximity: bool,
    pub congruence: bool,
    pub brand_equity: bool,
    pub b2b: bool,
    pub publicly_traded: bool,
    pub clutter: u32,
}

impl Covariates {
    pub fn flag(&self, flag: Flag) -> bool {
        match flag {
            Flag::RegionalProximity => self.regional_proximity,
            Flag::Congruence => self.congruence,
            Flag::BrandEquity => self.brand_equity,
            Flag::B2b => self.b2b,
            Flag::PubliclyTraded => self.publicly_traded,
        }
    }

    pub fn set_flag(&mut self, flag: Flag, value: bool) {
        match flag {
            Flag::RegionalProximity => self.regional_proximity = value,
            Flag::Congruence => self.congruence = value,
            Flag::BrandEquity => self.brand_equity = value,
            Flag::B2b => self.b2b = value,
            Flag::PubliclyTraded => self.publicly_traded = value,
        }
    }
}

impl Default for Covariates {
    /// The reference sponsor: a North American team sponsor in "other",
    /// no property flags, no characteristics.
    fn default() -> Self {
        Self {
            sponsorship_type: SponsorshipType::Team,
            big_four_property: None,
            gdp_growth: 0.0,
            cpi_inflation: 0.0,
            sponsor_location: SponsorLocation::NorthAmerica,
            sponsor_category: SponsorCategory::Other,
            regional_proximity: false,
            congruence: false,
            brand_equity: false,
            b2b: false,
            publicly_traded: false,
            clutter: 1,
        }
    }
}

mod optional_property {
    use super::BigFourProperty;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        value: &Option<BigFourProperty>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(value.map(|p| p.token()).unwrap_or("none"))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Option<BigFourProperty>, D::Error> {
        let raw = Option::<String>::deserialize(deserializer)?;
        match raw.as_deref().map(str::trim) {
            None | Some("") => Ok(None),
            Some(s) if s.eq_ignore_ascii_case("none") => Ok(None),
            Some(s) => s.parse().map(Some).map_err(serde::de::Error::custom),
        }
    }
}

/// One sponsorship-year row of the panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelObservation {
    pub sponsorship_id: String,
    /// Year index within the sponsorship, starting at 1.
    pub period: u32,
    pub covariates: Covariates,
    /// True when the sponsorship ends in this period.
    pub event: bool,
    /// Cluster key for robust standard errors; defaults to the sponsorship id.
    pub cluster_id: String,
}

/// A sponsorship compressed to its duration and exit status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SponsorshipSpell {
    pub sponsorship_id: String,
    pub duration: u32,
    /// False means right-censored.
    pub ended: bool,
    pub cluster_id: String,
}

impl SponsorshipSpell {
    pub fn new(id: impl Into<String>, duration: u32, ended: bool) -> Self {
        let id = id.into();
        Self {
            cluster_id: id.clone(),
            sponsorship_id: id,
            duration,
            ended,
        }
    }
}
