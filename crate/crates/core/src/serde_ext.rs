//! Serde helpers for values that may be infinite. JSON has no literal for
//! non-finite numbers, so they travel as the tokens `"inf"`, `"-inf"` and `"nan"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::Scalar;

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum NumOrToken<T> {
    Num(T),
    Token(String),
}

pub(crate) fn parse_token<T: Scalar>(token: &str) -> Option<T> {
    match token {
        "inf" | "+inf" => Some(T::infinity()),
        "-inf" => Some(T::neg_infinity()),
        "nan" => Some(T::nan()),
        _ => None,
    }
}

/// `#[serde(with = "ext_float")]` for scalars that may be non-finite.
pub mod ext_float {
    use super::*;

    pub fn serialize<T: Scalar, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            v.serialize(s)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v.is_sign_positive() {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        match NumOrToken::<T>::deserialize(d)? {
            NumOrToken::Num(v) => Ok(v),
            NumOrToken::Token(t) => parse_token(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("unrecognized number token {t:?}"))),
        }
    }
}

/// Same as [`ext_float`] for `Option<T>` fields.
pub mod ext_float_opt {
    use super::*;

    pub fn serialize<T: Scalar, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => super::ext_float::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T: Scalar, D: Deserializer<'de>>(d: D) -> Result<Option<T>, D::Error> {
        match Option::<NumOrToken<T>>::deserialize(d)? {
            None => Ok(None),
            Some(NumOrToken::Num(v)) => Ok(Some(v)),
            Some(NumOrToken::Token(t)) => parse_token(&t)
                .map(Some)
                .ok_or_else(|| serde::de::Error::custom(format!("unrecognized number token {t:?}"))),
        }
    }
}
