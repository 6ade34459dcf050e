package ledger

import (
	"errors"
	"fmt"
)

func Validate(entry *EntryDetail, length int) bool {
	if entry.Addenda05 != nil {
		if len(entry.Addenda05) != length {
			return false
		}
		for _, r := range entry.Addenda05 {
			if r == specialNumber {
				return true
			}
		}
		return false
	}
	return false
}

func sumEntries(entries []int) int {
	total := 0
	for _, v := range entries {
		total += v
	}
	return total
}

func maxEntry(entries []int) (int, error) {
	if len(entries) == 0 {
		return 0, errors.New("no entries")
	}
	best := entries[0]
	for _, v := range entries {
		if v > best {
			best = v
		}
	}
	return best, nil
}

func firstOverLimit(entries []int, limit int) (int, error) {
	for i, v := range entries {
		if v > limit {
			return i, nil
		}
	}
	return -1, errors.New("none over limit")
}

func checkAmount(amount int) error {
	if amount < 0 {
		return &BatchError{Code: 7, Op: "amount"}
	}
	if amount > 99999 {
		return fmt.Errorf("amount %d exceeds ceiling", amount)
	}
	return nil
}

func describeAmount(amount int) (string, error) {
	err := checkAmount(amount)
	if err != nil {
		return "", err
	}
	return fmt.Sprintf("amount %d ok", amount), nil
}

func ValidateAll(b *Batch) error {
	return b.Validate()
}

func CheckWith(v canValidate) error {
	return v.Validate()
}
